//! Thomas algorithm for tridiagonal systems.
//!
//! Every implicit sweep in the solvers reduces to `A x = d` with `A`
//! tridiagonal and strictly diagonally dominant (M-matrix), so no pivoting
//! is needed.

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower`,
/// main diagonal `diag` and super-diagonal `upper`.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is unused),
/// `upper[i]` multiplies `x[i+1]` (so `upper[n-1]` is unused). `scratch`
/// must have the same length as `rhs`; it is reused between calls to avoid
/// reallocation inside the time loop.
pub fn solve_in_place(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    let n = rhs.len();
    debug_assert!(n >= 1);
    debug_assert_eq!(lower.len(), n);
    debug_assert_eq!(diag.len(), n);
    debug_assert_eq!(upper.len(), n);
    debug_assert_eq!(scratch.len(), n);

    // Forward elimination: scratch holds the modified super-diagonal.
    let mut piv = diag[0];
    scratch[0] = upper[0] / piv;
    rhs[0] /= piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / piv;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / piv;
    }

    // Back substitution.
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

//! The gradient-constrained problem for the integrated value u, solved two
//! independent ways.
//!
//! Route one integrates the penalty solution: `u(x,y,t) = ∫ v(z,y,t) dz`
//! from the left edge (where v vanishes). Route two never sees v: it steps
//! the quasilinear equation for u implicitly and enforces the slope
//! constraint `u_x ≤ 1` by a projection sweep after each step — the
//! discrete analogue of buying down to the boundary. Agreement between the
//! two routes is the method-level cross-check.

use crate::grid::{Grid, GridError, SurfaceKind, ValueSurface};
use crate::model::ModelParams;
use crate::penalty::{SolverConfig, SolverError, StepReport};
use crate::tridiag;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObstacleError {
    #[error("v does not vanish at the left edge (max |v(x_min)| = {0:.3e}); truncation too tight")]
    LeftBoundaryNotVanishing(f64),
    #[error("u lost monotonicity in x at step {step} (worst slope {worst:.3e})")]
    NonmonotoneSlice { step: usize, worst: f64 },
    #[error("surfaces live on different grids or stored times")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Per-slice and headline discrepancies between the two solution routes.
///
/// Gradients are compared at cell midpoints: the forward difference of u
/// against the two-node average of v, which is exactly the pairing the
/// trapezoid integration inverts. Relative Φ gaps are measured in u-units
/// (Φ/s), floored at 0.1 quota units to stay meaningful where the value
/// vanishes.
#[derive(Debug, Clone)]
pub struct CrossCheckReport {
    /// max over final-slice midpoints of |u_x(projected) − v(penalty)|.
    pub max_ux_minus_v: f64,
    /// max over final-slice nodes of |Δ(Φ/s)| / max(Φ/s, 0.1).
    pub max_rel_phi: f64,
    /// max over final-slice nodes of |Δ(Φ/s)| (absolute, u-units).
    pub max_abs_u: f64,
    /// max over final-slice interior nodes of |min(1 − u_x, −A_h[u])|.
    pub complementarity: f64,
    /// Per stored slice: (t, max |u_x − v|, max rel Φ gap, max abs u gap).
    pub per_slice: Vec<(f64, f64, f64, f64)>,
}

impl CrossCheckReport {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("max_ux_minus_v={:.6e}\n", self.max_ux_minus_v));
        out.push_str(&format!("max_rel_phi={:.6e}\n", self.max_rel_phi));
        out.push_str(&format!("max_abs_u={:.6e}\n", self.max_abs_u));
        out.push_str(&format!("complementarity={:.6e}\n", self.complementarity));
        for (t, g, r, a) in &self.per_slice {
            out.push_str(&format!(
                "slice t={t} max_ux_minus_v={g:.6e} max_rel_phi={r:.6e} max_abs_u={a:.6e}\n"
            ));
        }
        out
    }
}

/// Cumulative trapezoid integral of v in x per (y, t) slice, anchored at
/// u(x_min) = 0. Requires v ≈ 0 on the left edge.
pub fn integrate_v_to_u(v: &ValueSurface) -> Result<ValueSurface, ObstacleError> {
    let grid = &v.grid;
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let mut worst_left: f64 = 0.0;
    for slice in &v.data {
        for j in 0..ny {
            worst_left = worst_left.max(slice[grid.idx(0, j)].abs());
        }
    }
    if worst_left > 0.01 {
        return Err(ObstacleError::LeftBoundaryNotVanishing(worst_left));
    }
    let mut u = ValueSurface::new(grid.clone(), SurfaceKind::U, v.eps);
    for (k, slice) in v.data.iter().enumerate() {
        let mut out = vec![0.0; slice.len()];
        for j in 0..ny {
            let mut acc = 0.0;
            for i in 1..nx {
                acc += 0.5 * grid.dx * (slice[grid.idx(i - 1, j)] + slice[grid.idx(i, j)]);
                out[grid.idx(i, j)] = acc;
            }
        }
        u.push_slice(v.times[k], out);
    }
    Ok(u)
}

/// One left-to-right sweep `u_i ← min(u_i, u_{i−1} + dx)`: the largest
/// minorant with discrete slope ≤ 1 reachable by forward propagation.
/// Idempotent and order-preserving.
pub fn gradient_project(row: &mut [f64], dx: f64) {
    for i in 1..row.len() {
        let cap = row[i - 1] + dx;
        if row[i] > cap {
            row[i] = cap;
        }
    }
}

/// Solves the gradient-constrained problem for u directly: backward-Euler
/// steps of the quasilinear operator (quadratic term lagged one time step),
/// then the projection sweep. Boundary behavior: u = 0 at x_min, slope-1
/// extension at x_max, zero normal derivative in y.
pub fn solve_u_projected(
    grid: &Arc<Grid>,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<(ValueSurface, Vec<StepReport>), ObstacleError> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let dt = grid.dt;
    let dx = grid.dx;
    let single_row = ny == 1;
    let ax = 0.5 * params.nu * params.nu / (dx * dx);
    let ay = if single_row {
        0.0
    } else {
        0.5 * params.sigma * params.sigma / (grid.dy * grid.dy)
    };
    let by = if single_row {
        0.0
    } else {
        (params.mu + 0.5 * params.sigma * params.sigma) / (2.0 * grid.dy)
    };
    let growth = params.mu - params.r;
    let half_trans: Vec<f64> = grid
        .y_nodes
        .iter()
        .map(|y| 0.5 * y.exp() / params.m)
        .collect();

    let idx = |i: usize, j: usize| i * ny + j;

    // Initial slice u(x, y, 0) = x⁺, exact at nodes.
    let mut u: Vec<f64> = (0..nx)
        .flat_map(|i| std::iter::repeat(grid.x_nodes[i].max(0.0)).take(ny))
        .collect();

    let mut surface = ValueSurface::new(grid.clone(), SurfaceKind::U, None);
    surface.push_slice(0.0, u.clone());

    // Quadratic Hamiltonian with the upwind (backward) difference, same
    // bias as the transport term in the v-equation it differentiates to.
    let slope_sq = |u: &[f64], i: usize, j: usize| -> f64 {
        let s = (u[idx(i, j)] - u[idx(i - 1, j)]) / dx;
        s * s
    };

    let rhs_at = |u: &[f64], lag: &[f64], i: usize, j: usize| -> f64 {
        let c = idx(i, j);
        let uc = u[c];
        let uxm = u[idx(i - 1, j)];
        let uxp = u[idx(i + 1, j)];
        let mut acc = ax * (uxm - 2.0 * uc + uxp);
        if !single_row {
            let (uym, uyp) = if j == 0 {
                (u[idx(i, 1)], u[idx(i, 1)])
            } else if j == ny - 1 {
                (u[idx(i, j - 1)], u[idx(i, j - 1)])
            } else {
                (u[idx(i, j - 1)], u[idx(i, j + 1)])
            };
            acc += ay * (uym - 2.0 * uc + uyp) + by * (uyp - uym);
        }
        acc + growth * uc - half_trans[j] * slope_sq(lag, i, j)
    };

    let n_band = nx.max(ny);
    let mut defect = vec![0.0; nx * ny];
    let mut w = vec![0.0; nx * ny];
    let mut lower = vec![0.0; n_band];
    let mut diag = vec![0.0; n_band];
    let mut upper = vec![0.0; n_band];
    let mut rhs = vec![0.0; n_band];
    let mut scratch = vec![0.0; n_band];

    let stride = config.store_every.max(1);
    let mut reports = Vec::with_capacity(grid.spec.nt);

    for step in 1..=grid.spec.nt {
        let u_prev = u.clone();
        // Defect-correction iteration on the (linear) implicit system; the
        // lagged quadratic term sits on the right-hand side.
        let mut residual: f64 = 0.0;
        let mut iters = 0;
        loop {
            // Maintain the slope-1 extension before evaluating stencils.
            for j in 0..ny {
                u[idx(nx - 1, j)] = u[idx(nx - 2, j)] + dx;
            }
            residual = 0.0;
            for i in 1..nx - 1 {
                for j in 0..ny {
                    let c = idx(i, j);
                    let r = (u[c] - u_prev[c]) / dt - rhs_at(&u, &u_prev, i, j);
                    defect[c] = r;
                    residual = residual.max(r.abs());
                }
            }
            if residual <= config.newton_tol || !residual.is_finite() {
                break;
            }
            if iters >= config.newton_max_iter {
                return Err(SolverError::NewtonDiverged {
                    step,
                    residual,
                    iters,
                }
                .into());
            }
            iters += 1;

            for j in 0..ny {
                for i in 1..nx - 1 {
                    let k = i - 1;
                    lower[k] = -dt * ax;
                    diag[k] = 1.0 + dt * (2.0 * ax - growth);
                    upper[k] = -dt * ax;
                    if i == nx - 2 {
                        // The ghost beyond x_max moves with this node.
                        diag[k] -= dt * ax;
                        upper[k] = 0.0;
                    }
                    rhs[k] = -defect[idx(i, j)];
                }
                let n = nx - 2;
                tridiag::solve_in_place(
                    &lower[..n],
                    &diag[..n],
                    &upper[..n],
                    &mut rhs[..n],
                    &mut scratch[..n],
                );
                for i in 1..nx - 1 {
                    w[idx(i, j)] = rhs[i - 1];
                }
            }

            if !single_row {
                for i in 1..nx - 1 {
                    for j in 0..ny {
                        if j == 0 {
                            lower[j] = 0.0;
                            diag[j] = 1.0 + 2.0 * dt * ay;
                            upper[j] = -2.0 * dt * ay;
                        } else if j == ny - 1 {
                            lower[j] = -2.0 * dt * ay;
                            diag[j] = 1.0 + 2.0 * dt * ay;
                            upper[j] = 0.0;
                        } else {
                            lower[j] = -dt * (ay - by);
                            diag[j] = 1.0 + 2.0 * dt * ay;
                            upper[j] = -dt * (ay + by);
                        }
                        rhs[j] = w[idx(i, j)];
                    }
                    tridiag::solve_in_place(
                        &lower[..ny],
                        &diag[..ny],
                        &upper[..ny],
                        &mut rhs[..ny],
                        &mut scratch[..ny],
                    );
                    for j in 0..ny {
                        u[idx(i, j)] += rhs[j];
                    }
                }
            } else {
                for i in 1..nx - 1 {
                    u[idx(i, 0)] += w[idx(i, 0)];
                }
            }
        }
        if !residual.is_finite() {
            return Err(SolverError::NewtonDiverged {
                step,
                residual,
                iters,
            }
            .into());
        }

        // Projection: clamp the discrete slope to 1, row by row, then
        // refresh the extension and audit monotonicity.
        let mut row = vec![0.0; nx];
        let mut worst_slope: f64 = f64::INFINITY;
        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        for j in 0..ny {
            for i in 0..nx {
                row[i] = u[idx(i, j)];
            }
            gradient_project(&mut row, dx);
            for i in 0..nx {
                u[idx(i, j)] = row[i].max(0.0);
            }
            u[idx(nx - 1, j)] = u[idx(nx - 2, j)] + dx;
            for i in 1..nx {
                worst_slope = worst_slope.min((u[idx(i, j)] - u[idx(i - 1, j)]) / dx);
            }
            for i in 0..nx {
                u_min = u_min.min(u[idx(i, j)]);
                u_max = u_max.max(u[idx(i, j)]);
            }
        }
        if worst_slope < -1e-8 {
            return Err(ObstacleError::NonmonotoneSlice {
                step,
                worst: worst_slope,
            });
        }

        let report = StepReport {
            step,
            t: step as f64 * dt,
            newton_iters: iters,
            max_residual: residual,
            v_min: u_min,
            v_max: u_max,
            clipped: 0,
        };
        log::debug!("{}", report.log_line());
        reports.push(report);
        if step % stride == 0 || step == grid.spec.nt {
            surface.push_slice(grid.t_nodes[step], u.clone());
        }
    }
    Ok((surface, reports))
}

/// Physical value Φ = e^y · u on the same nodes; Φ(x, s, θ) with s = e^y
/// and θ = T − t.
pub fn phi_from_u(u: &ValueSurface) -> ValueSurface {
    let grid = &u.grid;
    let mut phi = ValueSurface::new(grid.clone(), SurfaceKind::Phi, u.eps);
    for (k, slice) in u.data.iter().enumerate() {
        let mut out = vec![0.0; slice.len()];
        for i in 0..grid.spec.nx {
            for j in 0..grid.spec.ny {
                out[grid.idx(i, j)] = grid.y_nodes[j].exp() * slice[grid.idx(i, j)];
            }
        }
        phi.push_slice(u.times[k], out);
    }
    phi
}

/// Compares the penalty route (v, and u = ∫v) against the projected route
/// (u_proj) on the same grid and stored times.
pub fn cross_validate(
    v: &ValueSurface,
    u_proj: &ValueSurface,
    params: &ModelParams,
) -> Result<CrossCheckReport, ObstacleError> {
    let grid = &v.grid;
    if !grid.same_mesh(&u_proj.grid)
        || v.n_slices() != u_proj.n_slices()
        || v.times
            .iter()
            .zip(&u_proj.times)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(ObstacleError::GridMismatch);
    }
    let u_int = integrate_v_to_u(v)?;
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let dx = grid.dx;

    let mut per_slice = Vec::with_capacity(v.n_slices());
    for k in 0..v.n_slices() {
        let mut gap_grad: f64 = 0.0;
        let mut gap_rel: f64 = 0.0;
        let mut gap_abs: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.idx(i, j);
                if i + 1 < nx {
                    let cp = grid.idx(i + 1, j);
                    let ux = (u_proj.data[k][cp] - u_proj.data[k][c]) / dx;
                    let v_mid = 0.5 * (v.data[k][c] + v.data[k][cp]);
                    gap_grad = gap_grad.max((ux - v_mid).abs());
                }
                let du = (u_proj.data[k][c] - u_int.data[k][c]).abs();
                gap_abs = gap_abs.max(du);
                gap_rel = gap_rel.max(du / u_int.data[k][c].max(0.1));
            }
        }
        per_slice.push((v.times[k], gap_grad, gap_rel, gap_abs));
    }

    let complementarity = complementarity_gap(u_proj, params);
    let &(_, g, r, a) = per_slice.last().unwrap();
    Ok(CrossCheckReport {
        max_ux_minus_v: g,
        max_rel_phi: r,
        max_abs_u: a,
        complementarity,
        per_slice,
    })
}

/// Discrete complementarity defect of the projected solution at the final
/// stored slice pair: `max |min(1 − u_x, −A_h[u])|` over interior nodes,
/// with `u_x` the backward difference the projection controls.
fn complementarity_gap(u: &ValueSurface, params: &ModelParams) -> f64 {
    if u.n_slices() < 2 {
        return 0.0;
    }
    let grid = &u.grid;
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let k = u.n_slices() - 1;
    let dt = u.times[k] - u.times[k - 1];
    let dx = grid.dx;
    let single_row = ny == 1;
    let ax = 0.5 * params.nu * params.nu / (dx * dx);
    let ay = if single_row {
        0.0
    } else {
        0.5 * params.sigma * params.sigma / (grid.dy * grid.dy)
    };
    let by = if single_row {
        0.0
    } else {
        (params.mu + 0.5 * params.sigma * params.sigma) / (2.0 * grid.dy)
    };
    let growth = params.mu - params.r;
    let cur = &u.data[k];
    let prev = &u.data[k - 1];
    let idx = |i: usize, j: usize| i * ny + j;
    let mut worst: f64 = 0.0;
    for i in 1..nx - 1 {
        for j in 0..ny {
            let c = idx(i, j);
            let ux = (cur[c] - cur[idx(i - 1, j)]) / dx;
            let mut lap = ax * (cur[idx(i - 1, j)] - 2.0 * cur[c] + cur[idx(i + 1, j)]);
            if !single_row {
                let (uym, uyp) = if j == 0 {
                    (cur[idx(i, 1)], cur[idx(i, 1)])
                } else if j == ny - 1 {
                    (cur[idx(i, j - 1)], cur[idx(i, j - 1)])
                } else {
                    (cur[idx(i, j - 1)], cur[idx(i, j + 1)])
                };
                lap += ay * (uym - 2.0 * cur[c] + uyp) + by * (uyp - uym);
            }
            let half_trans = 0.5 * grid.y_nodes[j].exp() / params.m;
            let a_h = (cur[c] - prev[c]) / dt - lap - growth * cur[c] + half_trans * ux * ux;
            let gap = (1.0 - ux).min(-a_h);
            worst = worst.max(gap.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::penalty::solve_penalized;

    fn table1() -> ModelParams {
        ModelParams::benchmark()
    }

    fn grid(nx: usize, ny: usize, nt: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(GridSpec {
                x_min: -2.0,
                x_max: 3.0,
                y_min: -1.0,
                y_max: 1.0,
                nx,
                ny,
                nt,
                horizon: 1.0,
            })
            .unwrap(),
        )
    }

    fn surface_from(
        grid: &Arc<Grid>,
        times: &[f64],
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> ValueSurface {
        let mut s = ValueSurface::new(grid.clone(), SurfaceKind::V, None);
        for &t in times {
            let mut slice = vec![0.0; grid.nodes_per_slice()];
            for i in 0..grid.spec.nx {
                for j in 0..grid.spec.ny {
                    slice[grid.idx(i, j)] = f(grid.x_nodes[i], grid.y_nodes[j], t);
                }
            }
            s.push_slice(t, slice);
        }
        s
    }

    #[test]
    fn gradient_project_examples() {
        let mut row = [0.0, 0.5, 1.2, 1.5];
        gradient_project(&mut row, 0.5);
        assert_eq!(row, [0.0, 0.5, 1.0, 1.5]);

        let mut feasible = [0.0, 0.3, 0.55];
        let before = feasible;
        gradient_project(&mut feasible, 0.5);
        assert_eq!(feasible, before);

        let mut cascade = [0.0, 2.0, 4.0];
        gradient_project(&mut cascade, 1.0);
        assert_eq!(cascade, [0.0, 1.0, 2.0]);

        // Idempotence.
        let mut again = cascade;
        gradient_project(&mut again, 1.0);
        assert_eq!(again, cascade);
    }

    #[test]
    fn gradient_project_is_order_preserving() {
        let lowers = [0.0, 0.8, 1.9, 2.0, 2.4];
        let uppers = [0.1, 1.0, 2.2, 2.5, 2.6];
        let mut a = lowers;
        let mut b = uppers;
        gradient_project(&mut a, 0.4);
        gradient_project(&mut b, 0.4);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(x <= y);
        }
    }

    #[test]
    fn integrate_constant_and_indicator() {
        let g = grid(6, 3, 1);
        // v ≡ 1 except a vanishing left edge; check the exact trapezoid.
        let mut ones = surface_from(&g, &[0.0], |_, _, _| 1.0);
        for slice in ones.data.iter_mut() {
            for j in 0..3 {
                slice[g.idx(0, j)] = 0.0;
            }
        }
        let u = integrate_v_to_u(&ones).unwrap();
        assert!((u.value(0, 5, 1) - (5.0 - 0.5) * g.dx).abs() < 1e-14);

        // Indicator data reproduces x⁺ at the nodes (up to the half-cell
        // the trapezoid puts at the jump).
        let ind = surface_from(&g, &[0.0], |x, _, _| if x > 0.0 { 1.0 } else { 0.0 });
        let u = integrate_v_to_u(&ind).unwrap();
        for (i, &x) in g.x_nodes.iter().enumerate() {
            let expected = if x <= 0.0 { 0.0 } else { x - 0.5 * g.dx };
            assert!((u.value(0, i, 1) - expected).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn integrate_linear_ramp_matches_exact_integral() {
        // v rising 0 → 1 over [0, 1]: ∫₀¹ v = 1/2, and the trapezoid rule
        // is exact on piecewise-linear data.
        let g = Arc::new(
            Grid::build(GridSpec {
                x_min: -1.0,
                x_max: 1.0,
                y_min: -0.5,
                y_max: 0.5,
                nx: 21,
                ny: 3,
                nt: 1,
                horizon: 1.0,
            })
            .unwrap(),
        );
        let ramp = surface_from(&g, &[0.0], |x, _, _| x.clamp(0.0, 1.0));
        let u = integrate_v_to_u(&ramp).unwrap();
        assert!((u.value(0, 20, 1) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn integrate_rejects_nonvanishing_left_edge() {
        let g = grid(6, 3, 1);
        let bad = surface_from(&g, &[0.0], |_, _, _| 0.5);
        assert!(matches!(
            integrate_v_to_u(&bad),
            Err(ObstacleError::LeftBoundaryNotVanishing(_))
        ));
    }

    #[test]
    fn projected_solve_initial_slice_is_positive_part() {
        let g = grid(51, 11, 20);
        let (u, _) = solve_u_projected(&g, &table1(), &SolverConfig::default()).unwrap();
        for (i, &x) in g.x_nodes.iter().enumerate() {
            for j in 0..g.spec.ny {
                assert_eq!(u.value(0, i, j), x.max(0.0));
            }
        }
    }

    #[test]
    fn projected_solve_slope_capped_and_active_far_right() {
        let g = grid(51, 11, 40);
        let params = table1();
        let (u, _) = solve_u_projected(&g, &params, &SolverConfig::default()).unwrap();
        let k = u.n_slices() - 1;
        for j in 0..g.spec.ny {
            for i in 1..g.spec.nx {
                let slope = (u.value(k, i, j) - u.value(k, i - 1, j)) / g.dx;
                assert!((-1e-8..=1.0 + 1e-8).contains(&slope));
            }
            // Far beyond the trading boundary the constraint is active.
            let i = g.spec.nx - 2;
            let slope = (u.value(k, i, j) - u.value(k, i - 1, j)) / g.dx;
            assert!((slope - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn projected_solve_stays_convex_in_x() {
        let g = grid(51, 11, 40);
        let (u, _) = solve_u_projected(&g, &table1(), &SolverConfig::default()).unwrap();
        for k in 0..u.n_slices() {
            for j in 0..g.spec.ny {
                for i in 1..g.spec.nx - 1 {
                    let second =
                        u.value(k, i + 1, j) - 2.0 * u.value(k, i, j) + u.value(k, i - 1, j);
                    assert!(second >= -1e-8, "k={k} i={i} j={j} second={second}");
                }
            }
        }
    }

    #[test]
    fn phi_from_u_examples() {
        let g = grid(6, 3, 1);
        let u = surface_from(&g, &[0.0], |x, _, _| x.max(0.0));
        let phi = phi_from_u(&u);
        // At t = 0 (θ = T), Φ = x⁺ e^y.
        for (i, &x) in g.x_nodes.iter().enumerate() {
            for (j, &y) in g.y_nodes.iter().enumerate() {
                assert_eq!(phi.value(0, i, j), x.max(0.0) * y.exp());
            }
        }
        // A zero surface maps to zero; the y = 0 row equals u.
        let zero = surface_from(&g, &[0.0], |_, _, _| 0.0);
        assert!(phi_from_u(&zero).data[0].iter().all(|&p| p == 0.0));
        let j0 = 1; // y = 0 row of this grid
        assert!((g.y_nodes[j0]).abs() < 1e-15);
        for i in 0..g.spec.nx {
            assert_eq!(phi.value(0, i, j0), u.value(0, i, j0));
        }
    }

    #[test]
    fn cross_validate_identical_routes_and_mismatch() {
        let g = grid(41, 9, 20);
        let params = table1();
        let config = SolverConfig::default();
        let (v, _) = solve_penalized(0.02, &g, &params, &config).unwrap();
        let (u_proj, _) = solve_u_projected(&g, &params, &config).unwrap();
        let report = cross_validate(&v, &u_proj, &params).unwrap();
        assert!(report.max_ux_minus_v >= 0.0 && report.max_rel_phi >= 0.0);
        assert_eq!(report.per_slice.len(), v.n_slices());

        let other = grid(31, 9, 20);
        let (v2, _) = solve_penalized(0.02, &other, &params, &config).unwrap();
        assert!(matches!(
            cross_validate(&v2, &u_proj, &params),
            Err(ObstacleError::GridMismatch)
        ));
    }

    #[test]
    fn routes_agree_on_a_moderate_grid() {
        let g = Arc::new(
            Grid::build(GridSpec {
                x_min: -3.0,
                x_max: 6.0,
                y_min: -2.0,
                y_max: 2.0,
                nx: 91,
                ny: 41,
                nt: 100,
                horizon: 1.0,
            })
            .unwrap(),
        );
        let params = table1();
        let config = SolverConfig::default();
        let (v, _) = solve_penalized(0.01, &g, &params, &config).unwrap();
        let (u_proj, _) = solve_u_projected(&g, &params, &config).unwrap();
        let report = cross_validate(&v, &u_proj, &params).unwrap();
        // Looser than the production-grid gates; this grid is 2x coarser.
        assert!(
            report.max_ux_minus_v <= 0.08,
            "gradient gap {}",
            report.max_ux_minus_v
        );
        assert!(report.max_rel_phi <= 0.05, "phi gap {}", report.max_rel_phi);
    }
}

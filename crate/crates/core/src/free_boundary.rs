//! Extraction of the trading boundary x(y, t) as the level set where the
//! gradient constraint activates, plus the structural checks on it.
//!
//! Each (y, t) row of a v-surface is monotone in x, so the level crossing
//! is unique and linear inverse interpolation is robust (the field is
//! kinked near the boundary, so higher-order inversion buys nothing).
//! Rows whose crossing falls inside the clamped right face's numerical
//! boundary layer are flagged as right exits rather than reported as
//! spurious boundary points.

use crate::grid::ValueSurface;
use crate::model::{BoundConstants, ModelParams};
use std::io::Write;
use thiserror::Error;

/// Cells adjacent to x_max treated as the Dirichlet boundary layer: a
/// crossing in this zone means the true boundary has left the box.
pub const DEFAULT_EDGE_MARGIN: usize = 3;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("row (t index {slice}, y index {j}) is not monotone in x (worst step {worst:.3e})")]
    NonmonotoneRow { slice: usize, j: usize, worst: f64 },
    #[error("boundaries live on different (y, t) nodes")]
    GridMismatch,
    #[error("level {0} must lie strictly inside (0, 1)")]
    BadLevel(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFlag {
    /// Crossing found strictly inside the box.
    Interior,
    /// Whole row at or above the level: boundary left of x_min.
    LeftExit,
    /// No reliable crossing below the right boundary layer.
    RightExit,
}

impl BoundaryFlag {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryFlag::Interior => "interior",
            BoundaryFlag::LeftExit => "left_exit",
            BoundaryFlag::RightExit => "right_exit",
        }
    }
}

/// Sampled boundary surface: one location per (y, t) pair.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    pub y_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    /// Location per (t-index k, y-index j), flattened as `k * ny + j`;
    /// ±∞ for exits.
    pub x_of: Vec<f64>,
    pub flags: Vec<BoundaryFlag>,
    pub level: f64,
    /// Penalty parameter of the source surface, if any.
    pub eps: Option<f64>,
    /// Source-grid x spacing (used by tolerance rules) and horizon.
    pub dx: f64,
    pub horizon: f64,
}

impl FreeBoundary {
    #[inline]
    pub fn at(&self, k: usize, j: usize) -> (f64, BoundaryFlag) {
        let c = k * self.y_nodes.len() + j;
        (self.x_of[c], self.flags[c])
    }

    /// Bilinear interpolation of the boundary at (y, t); `None` when any
    /// supporting node is an exit (no finite boundary there).
    pub fn location(&self, y: f64, t: f64) -> Option<f64> {
        let (j0, wy) = bracket(&self.y_nodes, y);
        let (k0, wt) = bracket(&self.t_nodes, t);
        let mut acc = 0.0;
        for (dj, fy) in [(0usize, 1.0 - wy), (1, wy)] {
            for (dk, ft) in [(0usize, 1.0 - wt), (1, wt)] {
                let weight = fy * ft;
                if weight == 0.0 {
                    continue;
                }
                let (x, flag) = self.at(k0 + dk, (j0 + dj).min(self.y_nodes.len() - 1));
                if flag != BoundaryFlag::Interior {
                    return None;
                }
                acc += weight * x;
            }
        }
        Some(acc)
    }

    /// Columns: y, s = e^y, t, theta = T − t, x_boundary, flag.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "y,s,t,theta,x_boundary,flag")?;
        for (k, &t) in self.t_nodes.iter().enumerate() {
            for (j, &y) in self.y_nodes.iter().enumerate() {
                let (x, flag) = self.at(k, j);
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    crate::grid::fmt_sig(y),
                    crate::grid::fmt_sig(y.exp()),
                    crate::grid::fmt_sig(t),
                    crate::grid::fmt_sig(self.horizon - t),
                    if x.is_finite() {
                        crate::grid::fmt_sig(x)
                    } else if x > 0.0 {
                        "inf".to_string()
                    } else {
                        "-inf".to_string()
                    },
                    flag.label()
                )?;
            }
        }
        Ok(())
    }
}

fn bracket(nodes: &[f64], q: f64) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 || q <= nodes[0] {
        return (0, 0.0);
    }
    if q >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if nodes[mid] <= q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, (q - nodes[lo]) / (nodes[lo + 1] - nodes[lo]))
}

/// Extracts the boundary of `v` at `level` with the default right-edge
/// guard. The default level for a penalty surface at parameter ε is 1 − ε;
/// for the limit read-off use `1 − 1e−6` on the finest surface.
pub fn extract_boundary(v: &ValueSurface, level: f64) -> Result<FreeBoundary, BoundaryError> {
    extract_boundary_with_margin(v, level, DEFAULT_EDGE_MARGIN)
}

/// As [`extract_boundary`], with an explicit right-edge guard width (in
/// cells). Rows are required to be monotone in x up to 1e−8.
pub fn extract_boundary_with_margin(
    v: &ValueSurface,
    level: f64,
    edge_margin: usize,
) -> Result<FreeBoundary, BoundaryError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BoundaryError::BadLevel(level));
    }
    let grid = &v.grid;
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let guard_start = nx.saturating_sub(1 + edge_margin);
    let mut x_of = Vec::with_capacity(v.n_slices() * ny);
    let mut flags = Vec::with_capacity(v.n_slices() * ny);

    for k in 0..v.n_slices() {
        for j in 0..ny {
            let row: Vec<f64> = (0..nx).map(|i| v.value(k, i, j)).collect();
            let worst = row
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            if worst < -1e-8 {
                return Err(BoundaryError::NonmonotoneRow { slice: k, j, worst });
            }
            if row[0] >= level {
                x_of.push(f64::NEG_INFINITY);
                flags.push(BoundaryFlag::LeftExit);
                continue;
            }
            match row.iter().position(|&val| val >= level) {
                None => {
                    x_of.push(f64::INFINITY);
                    flags.push(BoundaryFlag::RightExit);
                }
                Some(i) if i >= guard_start => {
                    x_of.push(f64::INFINITY);
                    flags.push(BoundaryFlag::RightExit);
                }
                Some(i) => {
                    let (v0, v1) = (row[i - 1], row[i]);
                    let frac = if v1 > v0 { (level - v0) / (v1 - v0) } else { 1.0 };
                    x_of.push(grid.x_nodes[i - 1] + frac * grid.dx);
                    flags.push(BoundaryFlag::Interior);
                }
            }
        }
    }
    Ok(FreeBoundary {
        y_nodes: grid.y_nodes.clone(),
        t_nodes: v.times.clone(),
        x_of,
        flags,
        level,
        eps: v.eps,
        dx: grid.dx,
        horizon: grid.spec.horizon,
    })
}

/// Result of the two-sided containment check.
#[derive(Debug, Clone, Copy)]
pub struct BoundsReport {
    pub n_checked: usize,
    pub n_violations: usize,
    pub worst_low: f64,
    pub worst_high: f64,
}

impl BoundsReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.n_checked == 0 {
            0.0
        } else {
            self.n_violations as f64 / self.n_checked as f64
        }
    }
}

/// Checks every finite boundary point against the two-sided containment
/// bound `−(ν²/2 + μ − r)t − ε + log(1−ε) ≤ x(y,t) ≤ 3(a + e^y)/δ · e^{κt}`.
pub fn check_boundary_bounds(
    fb: &FreeBoundary,
    params: &ModelParams,
    consts: &BoundConstants,
    eps: f64,
) -> BoundsReport {
    let growth = params.barrier_growth();
    let mut report = BoundsReport {
        n_checked: 0,
        n_violations: 0,
        worst_low: 0.0,
        worst_high: 0.0,
    };
    for (k, &t) in fb.t_nodes.iter().enumerate() {
        let low = -growth * t - eps + (1.0 - eps).ln();
        for (j, &y) in fb.y_nodes.iter().enumerate() {
            let (x, flag) = fb.at(k, j);
            if flag != BoundaryFlag::Interior {
                continue;
            }
            let high = 3.0 * (consts.a_const + y.exp()) / consts.delta * (consts.kappa * t).exp();
            report.n_checked += 1;
            let low_gap = low - x; // positive = violation
            let high_gap = x - high;
            if low_gap > 0.0 || high_gap > 0.0 {
                report.n_violations += 1;
            }
            report.worst_low = report.worst_low.max(low_gap);
            report.worst_high = report.worst_high.max(high_gap);
        }
    }
    report
}

/// Result of the monotonicity-in-y check.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    /// Most negative increment x(y_{j+1}, t) − x(y_j, t) over finite pairs.
    pub max_negative_increment: f64,
    /// (t, y) of the worst pair, when one exists.
    pub worst_at: Option<(f64, f64)>,
    pub pass: bool,
}

/// The boundary must not decrease with the log-price: checks consecutive
/// finite pairs per time slice with tolerance 1e−6·dx.
pub fn monotonicity_in_y(fb: &FreeBoundary) -> MonotonicityReport {
    let tol = 1e-6 * fb.dx;
    let ny = fb.y_nodes.len();
    let mut worst = 0.0f64;
    let mut worst_at = None;
    for (k, &t) in fb.t_nodes.iter().enumerate() {
        for j in 0..ny.saturating_sub(1) {
            let (x0, f0) = fb.at(k, j);
            let (x1, f1) = fb.at(k, j + 1);
            if f0 != BoundaryFlag::Interior || f1 != BoundaryFlag::Interior {
                continue;
            }
            let inc = x1 - x0;
            if inc < worst {
                worst = inc;
                worst_at = Some((t, fb.y_nodes[j]));
            }
        }
    }
    MonotonicityReport {
        max_negative_increment: worst,
        worst_at,
        pass: worst >= -tol,
    }
}

/// Result of the ordering check across the ε schedule.
#[derive(Debug, Clone, Copy)]
pub struct EpsOrderingReport {
    /// Most negative value of x^{ε_small} − x^{ε_large} over common points.
    pub worst_gap: f64,
    pub n_compared: usize,
    pub pass: bool,
}

/// Boundaries for decreasing ε must be nondecreasing pointwise: for each
/// consecutive pair (coarser ε first), x^{ε₁} ≥ x^{ε₂} wherever both are
/// finite, with tolerance dx.
pub fn epsilon_monotonicity(fbs: &[&FreeBoundary]) -> Result<EpsOrderingReport, BoundaryError> {
    let mut worst = 0.0f64;
    let mut n = 0;
    for pair in fbs.windows(2) {
        let (coarse, fine) = (pair[0], pair[1]);
        if coarse.y_nodes.len() != fine.y_nodes.len()
            || coarse.t_nodes.len() != fine.t_nodes.len()
            || coarse
                .y_nodes
                .iter()
                .zip(&fine.y_nodes)
                .any(|(a, b)| (a - b).abs() > 1e-12)
            || coarse
                .t_nodes
                .iter()
                .zip(&fine.t_nodes)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(BoundaryError::GridMismatch);
        }
        for k in 0..coarse.t_nodes.len() {
            for j in 0..coarse.y_nodes.len() {
                let (xc, fc) = coarse.at(k, j);
                let (xf, ff) = fine.at(k, j);
                if fc != BoundaryFlag::Interior || ff != BoundaryFlag::Interior {
                    continue;
                }
                n += 1;
                worst = worst.min(xf - xc);
            }
        }
    }
    let dx = fbs.first().map(|f| f.dx).unwrap_or(0.0);
    Ok(EpsOrderingReport {
        worst_gap: worst,
        n_compared: n,
        pass: worst >= -dx,
    })
}

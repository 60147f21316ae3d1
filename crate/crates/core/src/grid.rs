//! Truncated computational box in transformed coordinates (x, y = log s,
//! t = T − θ), node indexing, physical transforms, and interpolation.
//!
//! The mesh is a uniform tensor grid: ADI sweeps then stay tridiagonal with
//! constant stencils. Value surfaces are immutable after a solve; queries
//! outside the box clamp to the nearest face and set a flag instead of
//! erroring, because Monte Carlo paths occasionally leave the box and the
//! face values match the known asymptotics.

use crate::model::BoundConstants;
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("value surface holds no time slices")]
    EmptySurface,
    #[error("surfaces live on different grids: {0}")]
    Mismatch(String),
    #[error("malformed surface file: {0}")]
    Parse(String),
}

/// Bounds and resolution of the computational box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub horizon: f64,
}

impl GridSpec {
    /// Default box for benchmark runs: contains the trading boundary for
    /// moderate log-prices while keeping solves under a minute.
    pub fn default_box(horizon: f64) -> Self {
        Self {
            x_min: -3.0,
            x_max: 6.0,
            y_min: -2.0,
            y_max: 2.0,
            nx: 181,
            ny: 81,
            nt: 400,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.x_min < 0.0 && 0.0 < self.x_max) {
            return Err(GridError::InvalidSpec(format!(
                "x bounds must straddle 0, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if !(self.y_min < self.y_max) {
            return Err(GridError::InvalidSpec(format!(
                "y bounds not increasing: [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        if self.nx < 3 || self.ny < 1 {
            return Err(GridError::InvalidSpec(format!(
                "need nx >= 3 and ny >= 1, got nx={}, ny={}",
                self.nx, self.ny
            )));
        }
        if self.ny >= 2 && self.ny < 3 {
            return Err(GridError::InvalidSpec(
                "ny must be 1 (degenerate row) or >= 3".into(),
            ));
        }
        if self.nt < 1 {
            return Err(GridError::InvalidSpec("nt must be >= 1".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(GridError::InvalidSpec(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Barrier-derived containment check: the trading boundary is known to
    /// stay below `3(a + e^{y_max})/δ · e^{κT}`. Returns a warning string
    /// when the box cannot certify containment (the boundary may exit
    /// through x_max for high log-prices).
    pub fn containment_warning(&self, consts: &BoundConstants) -> Option<String> {
        let required =
            3.0 * (consts.a_const + self.y_max.exp()) / consts.delta
                * (consts.kappa * self.horizon).exp();
        if self.x_max < required {
            Some(format!(
                "x_max = {} is below the barrier containment bound {:.3e} \
                 (kappa = {}, a = {}); the free boundary may exit the box for \
                 large y and will be flagged where it does",
                self.x_max, required, consts.kappa, consts.a_const
            ))
        } else {
            None
        }
    }
}

/// Uniform mesh over a validated [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
}

impl Grid {
    pub fn build(spec: GridSpec) -> Result<Self, GridError> {
        spec.validate()?;
        let dx = (spec.x_max - spec.x_min) / (spec.nx - 1) as f64;
        let dy = if spec.ny == 1 {
            1.0
        } else {
            (spec.y_max - spec.y_min) / (spec.ny - 1) as f64
        };
        let dt = spec.horizon / spec.nt as f64;
        let x_nodes = (0..spec.nx).map(|i| spec.x_min + i as f64 * dx).collect();
        let y_nodes = if spec.ny == 1 {
            vec![0.5 * (spec.y_min + spec.y_max)]
        } else {
            (0..spec.ny).map(|j| spec.y_min + j as f64 * dy).collect()
        };
        let t_nodes = (0..=spec.nt).map(|k| k as f64 * dt).collect();
        Ok(Self {
            spec,
            dx,
            dy,
            dt,
            x_nodes,
            y_nodes,
            t_nodes,
        })
    }

    /// Flat index of node (i, j) within one time slice (x-major).
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.spec.ny + j
    }

    pub fn nodes_per_slice(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    pub fn same_mesh(&self, other: &Grid) -> bool {
        self.spec == other.spec
    }
}

/// Maps transformed coordinates to physical ones: s = e^y, θ = T − t.
pub fn to_physical(x: f64, y: f64, t: f64, horizon: f64) -> (f64, f64, f64) {
    (x, y.exp(), horizon - t)
}

/// Inverse of [`to_physical`].
pub fn from_physical(x: f64, s: f64, theta: f64, horizon: f64) -> (f64, f64, f64) {
    (x, s.ln(), horizon - theta)
}

/// Which unknown a surface stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    /// Obstacle unknown v = ∂u/∂x, bounded by [0, 1+ε].
    V,
    /// Integrated value u, nonnegative with slope ≤ 1 in x.
    U,
    /// Physical value Φ = e^y · u.
    Phi,
}

impl SurfaceKind {
    pub fn label(&self) -> &'static str {
        match self {
            SurfaceKind::V => "v",
            SurfaceKind::U => "u",
            SurfaceKind::Phi => "phi",
        }
    }
}

/// Node-indexed scalar field over (x, y) per stored time slice.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub grid: Arc<Grid>,
    pub kind: SurfaceKind,
    /// Penalty parameter the surface was solved at, when applicable.
    pub eps: Option<f64>,
    /// Times of the stored slices, increasing.
    pub times: Vec<f64>,
    /// One flat slice per stored time, indexed by `grid.idx(i, j)`.
    pub data: Vec<Vec<f64>>,
}

/// Result of an interpolation query; `clamped` records whether the point
/// was moved onto the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    pub clamped: bool,
}

impl ValueSurface {
    pub fn new(grid: Arc<Grid>, kind: SurfaceKind, eps: Option<f64>) -> Self {
        Self {
            grid,
            kind,
            eps,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn push_slice(&mut self, t: f64, slice: Vec<f64>) {
        debug_assert_eq!(slice.len(), self.grid.nodes_per_slice());
        self.times.push(t);
        self.data.push(slice);
    }

    pub fn n_slices(&self) -> usize {
        self.data.len()
    }

    pub fn value(&self, slice: usize, i: usize, j: usize) -> f64 {
        self.data[slice][self.grid.idx(i, j)]
    }

    pub fn last_slice(&self) -> &[f64] {
        self.data.last().expect("surface has at least one slice")
    }

    /// Index of the stored slice at time `t`, if that exact time is stored.
    pub fn slice_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.grid.spec.horizon.max(1.0);
        self.times.iter().position(|&tk| (tk - t).abs() <= tol)
    }

    /// Trilinear interpolation at (x, y, t). Out-of-box coordinates clamp
    /// to the nearest face with the flag set. Exact on nodes and for fields
    /// affine in each coordinate.
    pub fn interpolate(&self, x: f64, y: f64, t: f64) -> Result<Interpolated, GridError> {
        if self.data.is_empty() {
            return Err(GridError::EmptySurface);
        }
        let g = &self.grid;
        let mut clamped = false;

        let (i0, wx) = locate(&g.x_nodes, x, &mut clamped);
        let (j0, wy) = locate(&g.y_nodes, y, &mut clamped);
        let (k0, wt) = locate(&self.times, t, &mut clamped);

        let mut value = 0.0;
        for (di, fx) in [(0usize, 1.0 - wx), (1, wx)] {
            if fx == 0.0 {
                continue;
            }
            for (dj, fy) in [(0usize, 1.0 - wy), (1, wy)] {
                if fy == 0.0 {
                    continue;
                }
                for (dk, ft) in [(0usize, 1.0 - wt), (1, wt)] {
                    if ft == 0.0 {
                        continue;
                    }
                    value += fx * fy * ft * self.value(k0 + dk, i0 + di, j0 + dj);
                }
            }
        }
        Ok(Interpolated { value, clamped })
    }

    /// Writes the surface as delimiter-separated text: a header row, then
    /// one row per node with columns x, y, t, value at 15 significant
    /// digits. `stride` thins the stored time slices (the final slice is
    /// always written).
    pub fn write_csv<W: Write>(&self, out: &mut W, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        writeln!(out, "x,y,t,value")?;
        let last = self.n_slices() - 1;
        for k in 0..self.n_slices() {
            if k % stride != 0 && k != last {
                continue;
            }
            for i in 0..self.grid.spec.nx {
                for j in 0..self.grid.spec.ny {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        fmt_sig(self.grid.x_nodes[i]),
                        fmt_sig(self.grid.y_nodes[j]),
                        fmt_sig(self.times[k]),
                        fmt_sig(self.value(k, i, j)),
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Reads a surface written by [`ValueSurface::write_csv`]. The node set
    /// must form a complete tensor product; comment lines starting with `#`
    /// are skipped.
    pub fn read_csv<R: BufRead>(
        input: R,
        kind: SurfaceKind,
        eps: Option<f64>,
        horizon: f64,
    ) -> Result<Self, GridError> {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut ts: Vec<f64> = Vec::new();
        let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| GridError::Parse(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue; // header row
            }
            let mut fields = trimmed.split(',');
            let mut next = |name: &str| -> Result<f64, GridError> {
                fields
                    .next()
                    .ok_or_else(|| {
                        GridError::Parse(format!("line {}: missing {name}", lineno + 1))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| GridError::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let (x, y, t, v) = (next("x")?, next("y")?, next("t")?, next("value")?);
            insert_sorted(&mut xs, x);
            insert_sorted(&mut ys, y);
            insert_sorted(&mut ts, t);
            rows.push((x, y, t, v));
        }
        if rows.is_empty() {
            return Err(GridError::Parse("no data rows".into()));
        }
        if rows.len() != xs.len() * ys.len() * ts.len() {
            return Err(GridError::Parse(format!(
                "{} rows do not fill a {}x{}x{} tensor grid",
                rows.len(),
                xs.len(),
                ys.len(),
                ts.len()
            )));
        }
        let spec = GridSpec {
            x_min: xs[0],
            x_max: *xs.last().unwrap(),
            y_min: ys[0],
            y_max: *ys.last().unwrap(),
            nx: xs.len(),
            ny: ys.len(),
            nt: ts.len().max(2) - 1,
            horizon,
        };
        let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 1.0 };
        let dy = if ys.len() > 1 { ys[1] - ys[0] } else { 1.0 };
        let dt = if ts.len() > 1 { ts[1] - ts[0] } else { horizon };
        let grid = Arc::new(Grid {
            spec,
            dx,
            dy,
            dt,
            x_nodes: xs.clone(),
            y_nodes: ys.clone(),
            t_nodes: ts.clone(),
        });
        let mut surface = ValueSurface::new(grid.clone(), kind, eps);
        for &t in &ts {
            surface.push_slice(t, vec![0.0; grid.nodes_per_slice()]);
        }
        for (x, y, t, v) in rows {
            let i = position(&xs, x);
            let j = position(&ys, y);
            let k = position(&ts, t);
            let idx = grid.idx(i, j);
            surface.data[k][idx] = v;
        }
        Ok(surface)
    }
}

/// Formats a float with 15 significant digits.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.14e}")
}

fn insert_sorted(values: &mut Vec<f64>, v: f64) {
    match values.binary_search_by(|a| a.partial_cmp(&v).unwrap()) {
        Ok(_) => {}
        Err(pos) => {
            // Tolerate text round-trip jitter on node coordinates.
            let tol = 1e-12 * (1.0 + v.abs());
            if pos > 0 && (values[pos - 1] - v).abs() <= tol {
                return;
            }
            if pos < values.len() && (values[pos] - v).abs() <= tol {
                return;
            }
            values.insert(pos, v);
        }
    }
}

fn position(values: &[f64], v: f64) -> usize {
    values
        .iter()
        .position(|a| (a - v).abs() <= 1e-12 * (1.0 + v.abs()))
        .expect("coordinate present by construction")
}

/// Finds the cell and interpolation weight for `q` along `nodes`,
/// clamping to the ends.
fn locate(nodes: &[f64], q: f64, clamped: &mut bool) -> (usize, f64) {
    let n = nodes.len();
    if n == 1 {
        return (0, 0.0);
    }
    if q <= nodes[0] {
        if q < nodes[0] {
            *clamped = true;
        }
        return (0, 0.0);
    }
    if q >= nodes[n - 1] {
        if q > nodes[n - 1] {
            *clamped = true;
        }
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
    ((lo), (q - nodes[lo]) / (nodes[lo + 1] - nodes[lo]))
}

//! Rectangular `(x, p)` sampling lattices, real and complex fields on them,
//! and the quadrature rules used to integrate those fields.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::FockDensityMatrix;

/// Uniform `nx × np` lattice over `[x_min, x_max] × [p_min, p_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
    pub hbar: f64,
}

impl PhaseGrid {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize, hbar: f64) -> Result<Self> {
        let g = PhaseGrid { x_min, x_max, p_min, p_max, nx, np, hbar };
        g.validate()?;
        Ok(g)
    }

    /// Grid symmetric about the origin.
    pub fn symmetric(x_ext: f64, p_ext: f64, nx: usize, np: usize, hbar: f64) -> Result<Self> {
        Self::new(-x_ext, x_ext, -p_ext, p_ext, nx, np, hbar)
    }

    /// Grid covering `±(9 + 2√n_max)` widths of the basis in each direction,
    /// where `n_max` is the highest appreciably occupied level. The margin
    /// keeps the Husimi function, which is `√2` wider than the vacuum Wigner
    /// function, inside the window to better than `1e-8` in mass.
    pub fn auto(rho: &FockDensityMatrix, nx: usize, np: usize) -> Result<Self> {
        let n_max = highest_occupied_level(rho, 1e-12);
        let k = 9.0 + 2.0 * (n_max as f64).sqrt();
        Self::symmetric(k * rho.sigma_x(), k * rho.sigma_p(), nx, np, rho.hbar())
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max, self.hbar].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("grid bounds must be finite".into()));
        }
        if self.nx < 8 || self.np < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 8 samples per axis, got {}x{}",
                self.nx, self.np
            )));
        }
        if !(self.x_max > self.x_min && self.p_max > self.p_min) {
            return Err(Error::InvalidParameter("grid bounds must be strictly increasing".into()));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::InvalidParameter("hbar must be positive".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.np).map(|j| self.p(j)).collect()
    }

    pub fn window(&self) -> Window {
        Window { x_lo: self.x_min, x_hi: self.x_max, p_lo: self.p_min, p_hi: self.p_max }
    }

    /// Trapezoid weights along x (spacing included).
    pub fn x_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.nx, self.dx())
    }

    pub fn p_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.np, self.dp())
    }
}

/// Highest index whose row of `rho` has an entry above `threshold`.
pub(crate) fn highest_occupied_level(rho: &FockDensityMatrix, threshold: f64) -> usize {
    let e = rho.entries();
    (0..rho.dim())
        .rev()
        .find(|&m| (0..rho.dim()).any(|k| e[(m, k)].norm() > threshold))
        .unwrap_or(0)
}

/// Axis-aligned phase-space rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl Window {
    pub fn area(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.p_hi - self.p_lo)
    }

    /// True if `other` lies inside `self` up to `tol` on every edge.
    pub fn contains(&self, other: &Window, tol: f64) -> bool {
        other.x_lo >= self.x_lo - tol
            && other.x_hi <= self.x_hi + tol
            && other.p_lo >= self.p_lo - tol
            && other.p_hi <= self.p_hi + tol
    }
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Interpolation order used to integrate sampled data over a sub-interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Piecewise cubic Lagrange interpolation (fourth-order accurate).
    Cubic,
    /// Piecewise linear interpolation (second-order accurate).
    Linear,
}

/// Weights `w_k` such that `∫_a^b f(x) dx ≈ Σ w_k f(x0 + k h)` for data
/// sampled at `n` uniform nodes; `[a, b]` is clipped to the node range.
pub fn interval_weights(x0: f64, h: f64, n: usize, a: f64, b: f64, rule: Rule) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let last = x0 + (n - 1) as f64 * h;
    let (a, b) = (a.max(x0), b.min(last));
    if b <= a || n < 2 {
        return w;
    }
    let k_lo = (((a - x0) / h).floor() as usize).min(n - 2);
    let k_hi = (((b - x0) / h).ceil() as usize).clamp(1, n - 1);
    // 2-point Gauss-Legendre integrates the cubic interpolant exactly
    let g = 0.5 / 3f64.sqrt();
    for k in k_lo..k_hi {
        let left = x0 + k as f64 * h;
        let lo = a.max(left);
        let hi = b.min(left + h);
        if hi <= lo {
            continue;
        }
        let len = hi - lo;
        let mid = 0.5 * (lo + hi);
        let pts = [mid - g * len, mid + g * len];
        match rule {
            Rule::Linear => {
                for &t in &pts {
                    let u = (t - left) / h;
                    w[k] += 0.5 * len * (1.0 - u);
                    w[k + 1] += 0.5 * len * u;
                }
            }
            Rule::Cubic => {
                let s = if n < 4 { 0 } else { k.saturating_sub(1).min(n - 4) };
                let m = n.min(4);
                for &t in &pts {
                    let u = (t - x0) / h;
                    for j in 0..m {
                        let mut l = 1.0;
                        for i in 0..m {
                            if i != j {
                                l *= (u - (s + i) as f64) / (j as f64 - i as f64);
                            }
                        }
                        w[s + j] += 0.5 * len * l;
                    }
                }
            }
        }
    }
    w
}

/// Anything that can be integrated against a field sampled on a grid.
///
/// `weights(grid, rule)[(i, j)]` is the quadrature weight of node
/// `(x_i, p_j)` in `∬ f(x,p) g(x,p) dx dp ≈ Σ w_ij g(x_i, p_j)` for smooth
/// `g`. Pointwise functions use trapezoid weights times `f`; indicator
/// functions integrate the interpolant of `g` over their support exactly.
pub trait PhaseFunction: Sync {
    fn weights(&self, grid: &PhaseGrid, rule: Rule) -> Array2<f64>;
}

impl<F> PhaseFunction for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn weights(&self, grid: &PhaseGrid, _rule: Rule) -> Array2<f64> {
        let wx = grid.x_weights();
        let wp = grid.p_weights();
        Array2::from_shape_fn((grid.nx, grid.np), |(i, j)| wx[i] * wp[j] * self(grid.x(i), grid.p(j)))
    }
}

/// What a [`ScalarField`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Wigner,
    Husimi,
    Smoothed,
}

/// Real field sampled on a [`PhaseGrid`]; `values[(i, j)]` is the value at
/// `(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PhaseGrid,
    values: Array2<f64>,
    kind: FieldKind,
}

impl ScalarField {
    pub fn new(grid: PhaseGrid, values: Array2<f64>, kind: FieldKind) -> Result<Self> {
        grid.validate()?;
        if values.dim() != (grid.nx, grid.np) {
            return Err(Error::InvalidParameter(format!(
                "field shape {:?} does not match grid {}x{}",
                values.dim(),
                grid.nx,
                grid.np
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Inconsistent(format!("non-finite field value {v}")));
        }
        if kind == FieldKind::Husimi {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -1e-12 {
                return Err(Error::Inconsistent(format!("Husimi field has negative value {min:.3e}")));
            }
        }
        Ok(ScalarField { grid, values, kind })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Trapezoid integral over the grid.
    pub fn mass(&self) -> f64 {
        let wx = self.grid.x_weights();
        let wp = self.grid.p_weights();
        self.values.indexed_iter().map(|((i, j), v)| v * wx[i] * wp[j]).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid indices of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for (idx, &v) in self.values.indexed_iter() {
            if v > best.1 {
                best = (idx, v);
            }
        }
        best.0
    }

    /// `max |self − other|` over a shared grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// `w·self + (1−w)·other`.
    pub fn mix(&self, other: &ScalarField, w: f64) -> Result<ScalarField> {
        if self.grid != other.grid || self.kind != other.kind {
            return Err(Error::InvalidParameter("cannot mix fields of different grid or kind".into()));
        }
        let values = &self.values * w + &other.values * (1.0 - w);
        ScalarField::new(self.grid, values, self.kind)
    }

    /// CSV with header `x,p,value`, rows ordered with x outermost.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,p,value")?;
        for i in 0..self.grid.nx {
            let x = self.grid.x(i);
            for j in 0..self.grid.np {
                writeln!(out, "{:e},{:e},{:e}", x, self.grid.p(j), self.values[(i, j)])?;
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> FieldStats {
        FieldStats { min: self.min(), max: self.max(), mass: self.mass() }
    }

    pub fn manifest(&self) -> FieldManifest {
        FieldManifest { grid: self.grid, kind: self.kind, stats: self.stats(), kernel: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub mass: f64,
}

/// JSON summary `{grid, kind, stats: {min, max, mass}}`, plus the smoothing
/// kernel for smoothed fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub grid: PhaseGrid,
    pub kind: FieldKind,
    pub stats: FieldStats,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel: Option<crate::smoothing::SmoothingKernel>,
}

/// Complex field on a [`PhaseGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: PhaseGrid,
    pub values: Array2<Complex64>,
}

impl ComplexField {
    pub fn integral(&self) -> Complex64 {
        let wx = self.grid.x_weights();
        let wp = self.grid.p_weights();
        self.values.indexed_iter().map(|((i, j), v)| v * (wx[i] * wp[j])).sum()
    }
}

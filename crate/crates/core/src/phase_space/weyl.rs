//! Weyl (characteristic) function and the Wigner function obtained from it by
//! discrete Fourier inversion.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{highest_occupied_level, FieldKind, PhaseGrid, ScalarField};
use crate::phase_space::displacement::ladder_parameter;
use crate::special::{displacement_radial_into, ln_factorials};
use crate::states::FockDensityMatrix;

/// `W̃(P,Q) = Tr[D̂(P,Q) ρ̂] / 2πħ` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylPoint {
    pub p: f64,
    pub q: f64,
    pub value: Complex64,
}

/// `Tr[D(λ) ρ]` organized by diagonals of `ρ`.
pub(crate) struct Characteristic {
    dim: usize,
    /// `upper[d][n] = ρ_{n, n+d}`
    upper: Vec<Vec<Complex64>>,
    /// `abs_sum[d][n] = |ρ_{n,n+d}| + |ρ_{n+d,n}|` (diagonal counted once)
    abs_sum: Vec<Vec<f64>>,
    lnfact: Vec<f64>,
}

impl Characteristic {
    pub(crate) fn new(rho: &FockDensityMatrix) -> Self {
        let dim = rho.dim();
        let e = rho.entries();
        let upper: Vec<Vec<Complex64>> = (0..dim).map(|d| (0..dim - d).map(|n| e[(n, n + d)]).collect()).collect();
        let abs_sum = upper
            .iter()
            .enumerate()
            .map(|(d, row)| row.iter().map(|z| if d == 0 { z.norm() } else { 2.0 * z.norm() }).collect())
            .collect();
        Characteristic { dim, upper, abs_sum, lnfact: ln_factorials(dim + 1) }
    }

    pub(crate) fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.dim * self.dim]
    }

    pub(crate) fn eval(&self, lambda: Complex64, table: &mut [f64]) -> Complex64 {
        let r = lambda.norm();
        displacement_radial_into(r, self.dim, &self.lnfact, table);
        let unit = if r > 0.0 { lambda / r } else { Complex64::new(1.0, 0.0) };
        let mut phase = Complex64::new(1.0, 0.0);
        let mut total = Complex64::new(0.0, 0.0);
        for d in 0..self.dim {
            let g = &table[d * self.dim..d * self.dim + self.dim - d];
            // Σ_n g ρ_{n,n+d} and Σ_n g ρ_{n+d,n} = conj(Σ_n g ρ_{n,n+d})
            let s: Complex64 = g.iter().zip(&self.upper[d]).map(|(gv, z)| z * gv).sum();
            total += phase * s;
            if d > 0 {
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                total += phase.conj() * s.conj() * sign;
            }
            phase *= unit;
        }
        total
    }

    /// Upper bound on `|Tr[D(λ) ρ]|` for every `λ` with `|λ| = r`.
    pub(crate) fn radial_bound(&self, r: f64, table: &mut [f64]) -> f64 {
        displacement_radial_into(r, self.dim, &self.lnfact, table);
        (0..self.dim)
            .map(|d| {
                let g = &table[d * self.dim..d * self.dim + self.dim - d];
                g.iter().zip(&self.abs_sum[d]).map(|(gv, a)| gv.abs() * a).sum::<f64>()
            })
            .sum()
    }

    /// Radius beyond which the characteristic function stays below `threshold`.
    pub(crate) fn cutoff_radius(&self, threshold: f64) -> f64 {
        let mut table = self.scratch();
        let r_max = ((4 * self.dim + 2) as f64).sqrt() + 40.0;
        let step = 0.05;
        let mut last = 0.0;
        let mut r = 0.0;
        while r <= r_max {
            if self.radial_bound(r, &mut table) >= threshold {
                last = r;
            }
            r += step;
        }
        last + 2.0 * step
    }
}

/// `W̃(P,Q) = Tr[D̂(P,Q) ρ̂] / 2πħ`.
///
/// Matrix elements of `D̂` are exact, so no truncation error arises for a
/// density supported on its own basis.
pub fn weyl_function(rho: &FockDensityMatrix, p_param: f64, q_param: f64) -> Result<WeylPoint> {
    if !(p_param.is_finite() && q_param.is_finite()) {
        return Err(Error::InvalidParameter("Weyl-function arguments must be finite".into()));
    }
    let chi = Characteristic::new(rho);
    let lambda = ladder_parameter(p_param, q_param, rho.sigma(), rho.hbar());
    let value = chi.eval(lambda, &mut chi.scratch()) / (2.0 * PI * rho.hbar());
    Ok(WeylPoint { p: p_param, q: q_param, value })
}

/// Largest tolerated imaginary part of the inverted field, in units of `1/πħ`.
const IMAG_RESIDUE_TOL: f64 = 1e-8;
/// `|Tr[D ρ]|` below which the Weyl function is treated as zero.
const WEYL_EDGE_THRESHOLD: f64 = 1e-15;
pub(crate) const MAX_LATTICE_POINTS: usize = 1 << 24;

/// Sampling plan for one axis of the Fourier inversion.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisPlan {
    /// oversampling of the output spacing
    pub(crate) refine: usize,
    /// FFT length
    pub(crate) len: usize,
    /// conjugate-lattice spacing
    pub(crate) step: f64,
}

impl AxisPlan {
    /// `spacing`: output grid spacing; `conj_cut`: extent of the conjugate
    /// variable that must be resolved; `(lo, hi)`: output window; `reach`:
    /// half-width of the state's support around the origin.
    pub(crate) fn new(spacing: f64, n: usize, lo: f64, hi: f64, conj_cut: f64, reach: f64, hbar: f64) -> Self {
        let h_needed = PI * hbar / (1.05 * conj_cut);
        let refine = ((spacing / h_needed).ceil() as usize).max(1);
        let h = spacing / refine as f64;
        let period = (hi - lo).max(reach - lo).max(hi + reach) + 2.0 * h;
        let min_len = ((period / h).ceil() as usize).max(refine * (n - 1) + 1);
        let len = min_len.next_power_of_two();
        AxisPlan { refine, len, step: 2.0 * PI * hbar / (len as f64 * h) }
    }

    pub(crate) fn conj(&self, k: usize) -> f64 {
        (k as f64 - (self.len / 2) as f64) * self.step
    }
}

/// Wigner function by discrete Fourier inversion of the Weyl function,
/// `W(x,p) = ∫ W̃(P,Q) e^{−i(Px−Qp)/ħ} dP dQ / 2πħ`.
///
/// The `(P,Q)` lattice is chosen so that the output grid is (a subsample of)
/// its exact conjugate lattice, with the Weyl function below `1e-15` at the
/// lattice edge and the period longer than the grid plus the state's
/// support. The imaginary residue of the inversion is checked, not dropped.
pub fn wigner_from_weyl(rho: &FockDensityMatrix, grid: &PhaseGrid) -> Result<ScalarField> {
    grid.validate()?;
    let hbar = rho.hbar();
    if (grid.hbar - hbar).abs() > 1e-15 * hbar {
        return Err(Error::InvalidParameter("grid and state disagree on hbar".into()));
    }
    let (sx, sp) = (rho.sigma_x(), rho.sigma_p());
    let chi = Characteristic::new(rho);
    let r_cut = chi.cutoff_radius(WEYL_EDGE_THRESHOLD);
    let n_eff = highest_occupied_level(rho, 1e-15);
    let reach = ((4 * n_eff + 2) as f64).sqrt() + 9.0;

    let px = AxisPlan::new(grid.dx(), grid.nx, grid.x_min, grid.x_max, r_cut * hbar / sx, reach * sx, hbar);
    let pp = AxisPlan::new(grid.dp(), grid.np, grid.p_min, grid.p_max, r_cut * hbar / sp, reach * sp, hbar);
    if px.len * pp.len > MAX_LATTICE_POINTS {
        return Err(Error::Inconsistent(format!(
            "Fourier lattice {}x{} too large; coarsen the grid or shrink its window",
            px.len, pp.len
        )));
    }

    // lattice[k * lp + l] = W̃(P_k, Q_l) e^{−i P_k x_min/ħ} e^{i Q_l p_min/ħ}
    let (lx, lp) = (px.len, pp.len);
    let mut lattice = vec![Complex64::new(0.0, 0.0); lx * lp];
    let norm = 1.0 / (2.0 * PI * hbar);
    lattice.par_chunks_mut(lp).enumerate().for_each(|(k, row)| {
        let p_param = px.conj(k);
        let lam_im = p_param * sx / hbar;
        if lam_im.abs() > r_cut {
            return;
        }
        let mut table = chi.scratch();
        let row_phase = Complex64::from_polar(norm, -p_param * grid.x_min / hbar);
        for (l, cell) in row.iter_mut().enumerate() {
            let q_param = pp.conj(l);
            let lambda = ladder_parameter(p_param, q_param, sx, hbar);
            if lambda.norm() > r_cut {
                continue;
            }
            *cell = chi.eval(lambda, &mut table) * row_phase * Complex64::from_polar(1.0, q_param * grid.p_min / hbar);
        }
    });

    // Q → p: e^{+2πi l m / lp}
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(lp);
    lattice.par_chunks_mut(lp).for_each(|row| {
        if row.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
            inv.process(row);
        }
    });

    // P → x: e^{−2πi k j / lx}, only for the p columns that land on the grid
    let fwd = planner.plan_fft_forward(lx);
    // dP dQ / 2πħ
    let scale = px.step * pp.step / (2.0 * PI * hbar);
    let columns: Vec<Vec<Complex64>> = (0..grid.np)
        .into_par_iter()
        .map(|j| {
            let m = pp.refine * j;
            let mut col: Vec<Complex64> = (0..lx).map(|k| lattice[k * lp + m]).collect();
            fwd.process(&mut col);
            (0..grid.nx)
                .map(|i| {
                    let jx = px.refine * i;
                    let sign = if (jx + m).is_multiple_of(2) { 1.0 } else { -1.0 };
                    col[jx] * (sign * scale)
                })
                .collect()
        })
        .collect();

    let mut values = Array2::zeros((grid.nx, grid.np));
    let mut residue = 0.0f64;
    for (j, col) in columns.iter().enumerate() {
        for (i, z) in col.iter().enumerate() {
            values[(i, j)] = z.re;
            residue = residue.max(z.im.abs());
        }
    }
    if residue * PI * hbar > IMAG_RESIDUE_TOL {
        return Err(Error::Inconsistent(format!(
            "Fourier inversion left imaginary residue {residue:.3e}; the grid is too small for this state"
        )));
    }
    ScalarField::new(*grid, values, FieldKind::Wigner)
}

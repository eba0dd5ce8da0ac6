//! Wigner functions from the position-representation integral, and the
//! closed form for number states.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, FieldKind, PhaseGrid, ScalarField};
use crate::special::{hermite_function, laguerre};
use crate::states::{hermite_band, PhysicsConfig, PositionWavefunction};

/// Accepted disagreement between two quadrature step sizes.
const CONVERGENCE_TOL: f64 = 1e-10;

/// `(1/2πħ) ∫ f(x − y/2) conj(g(x + y/2)) e^{ipy/ħ} dy` on every grid node.
///
/// `support` bounds both functions and `band` bounds the sum of their
/// wavenumbers; the step is chosen from `band` and the largest `|p|`.
fn pair_integral<F, G>(f: &F, g: &G, support: (f64, f64), band: f64, grid: &PhaseGrid, step_scale: f64) -> Array2<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync,
    G: Fn(f64) -> Complex64 + Sync,
{
    let hbar = grid.hbar;
    let p_abs = grid.p_min.abs().max(grid.p_max.abs());
    let hy = step_scale * 2.0 * PI / (1.5 * (band + p_abs / hbar));
    let ps = grid.ps();
    let (lo, hi) = support;
    let rows: Vec<Vec<Complex64>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            let reach = 2.0 * (x - lo).min(hi - x);
            let mut out = vec![Complex64::new(0.0, 0.0); grid.np];
            if reach <= 0.0 {
                return out;
            }
            let k_max = (reach / hy).floor() as i64;
            let u: Vec<Complex64> = (-k_max..=k_max)
                .map(|k| {
                    let y = k as f64 * hy;
                    f(x - 0.5 * y) * g(x + 0.5 * y).conj()
                })
                .collect();
            for (j, &p) in ps.iter().enumerate() {
                let step = Complex64::from_polar(1.0, p * hy / hbar);
                let mut z = Complex64::from_polar(1.0, -p * k_max as f64 * hy / hbar);
                let mut acc = Complex64::new(0.0, 0.0);
                for uk in &u {
                    acc += uk * z;
                    z *= step;
                }
                out[j] = acc * (hy / (2.0 * PI * hbar));
            }
            out
        })
        .collect();
    Array2::from_shape_fn((grid.nx, grid.np), |(i, j)| rows[i][j])
}

/// Same integral with a second, coarser step on a subset of rows; fails if
/// the two disagree.
fn checked_pair_integral<F, G>(f: &F, g: &G, support: (f64, f64), band: f64, grid: &PhaseGrid) -> Result<Array2<Complex64>>
where
    F: Fn(f64) -> Complex64 + Sync,
    G: Fn(f64) -> Complex64 + Sync,
{
    let values = pair_integral(f, g, support, band, grid, 1.0);
    let stride = (grid.nx / 8).max(1);
    let rows: Vec<usize> = (0..grid.nx).step_by(stride).collect();
    let sub = PhaseGrid { nx: 1, ..*grid };
    let mut residual = 0.0f64;
    for &i in &rows {
        let row_grid = PhaseGrid { x_min: grid.x(i), x_max: grid.x(i), ..sub };
        let coarse = pair_integral(f, g, support, band, &row_grid, 1.25);
        for j in 0..grid.np {
            residual = residual.max((coarse[(0, j)] - values[(i, j)]).norm());
        }
    }
    if residual * PI * grid.hbar > CONVERGENCE_TOL {
        return Err(Error::Quadrature { residual, context: "Wigner integral over y".into() });
    }
    Ok(values)
}

/// Wigner function of a pure state by direct quadrature of
/// `(1/2πħ) ∫ ψ*(x + y/2) ψ(x − y/2) e^{ipy/ħ} dy`.
pub fn wigner_direct(psi: &PositionWavefunction, grid: &PhaseGrid) -> Result<ScalarField> {
    grid.validate()?;
    if (grid.hbar - psi.hbar()).abs() > 1e-15 * psi.hbar() {
        return Err(Error::InvalidParameter("grid and wavefunction disagree on hbar".into()));
    }
    let f = |x: f64| psi.eval(x);
    let values = checked_pair_integral(&f, &f, psi.support(), 2.0 * psi.band(), grid)?;
    ScalarField::new(*grid, values.mapv(|z| z.re), FieldKind::Wigner)
}

/// Wigner transform `W_mn` of `|m⟩⟨n|` at the basis scale of `cfg`;
/// `∫ W_mn dx dp = δ_mn` and `W_mn = conj(W_nm)`.
pub fn cross_wigner(m: usize, n: usize, grid: &PhaseGrid, cfg: &PhysicsConfig) -> Result<ComplexField> {
    cfg.validate()?;
    grid.validate()?;
    for idx in [m, n] {
        if idx >= cfg.fock_cutoff {
            return Err(Error::IndexOutOfRange { index: idx, cutoff: cfg.fock_cutoff });
        }
    }
    if (grid.hbar - cfg.hbar).abs() > 1e-15 * cfg.hbar {
        return Err(Error::InvalidParameter("grid and config disagree on hbar".into()));
    }
    let s = cfg.sigma;
    let top = m.max(n);
    let r = s * (((4 * top + 2) as f64).sqrt() + 13.0);
    let fm = |x: f64| Complex64::new(hermite_function(m, x, s), 0.0);
    let fn_ = |x: f64| Complex64::new(hermite_function(n, x, s), 0.0);
    let values = checked_pair_integral(&fm, &fn_, (-r, r), 2.0 * hermite_band(top, s), grid)?;
    Ok(ComplexField { grid: *grid, values })
}

/// Closed-form Wigner function of `|n⟩`,
/// `((−1)ⁿ/πħ) Lₙ(2u) e^{−u}` with `u = x²/2σ_x² + p²/2σ_p²`.
pub fn wigner_fock_analytic(n: usize, grid: &PhaseGrid, sigma: f64) -> Result<ScalarField> {
    grid.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let hbar = grid.hbar;
    let (sx, sp) = (sigma, hbar / (2.0 * sigma));
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let values = Array2::from_shape_fn((grid.nx, grid.np), |(i, j)| {
        let (x, p) = (grid.x(i), grid.p(j));
        let u = x * x / (2.0 * sx * sx) + p * p / (2.0 * sp * sp);
        sign * laguerre(n, 2.0 * u) * (-u).exp() / (PI * hbar)
    });
    ScalarField::new(*grid, values, FieldKind::Wigner)
}

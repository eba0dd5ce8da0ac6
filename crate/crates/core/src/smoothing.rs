//! Gaussian smoothing of Wigner fields and the Husimi function.
//!
//! Smoothing with a unit-mass Gaussian whose half-widths are the vacuum
//! deviations `(σ_x, σ_p)`, i.e. at smoothing measure `σ_x σ_p = ħ/2`, turns
//! the Wigner function into the Husimi function `⟨α|ρ̂|α⟩ / 2πħ`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, PhaseGrid, ScalarField};
use crate::phase_space::wigner_from_weyl;
use crate::states::FockDensityMatrix;

/// Threshold on the Husimi discrepancy for the identity to count as holding.
pub const HUSIMI_IDENTITY_TOL: f64 = 1e-6;

/// Gaussian half-widths `(sx, sp)` and their product, the smoothing measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingKernel {
    pub sx: f64,
    pub sp: f64,
    pub measure: f64,
    /// Whether `measure` equals `ħ/2`.
    pub quantum: bool,
}

impl SmoothingKernel {
    pub fn new(sx: f64, sp: f64, hbar: f64) -> Result<Self> {
        if !(sx > 0.0 && sp > 0.0 && sx.is_finite() && sp.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel half-widths must be positive, got ({sx}, {sp})")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let measure = sx * sp;
        let quantum = (measure - 0.5 * hbar).abs() < 1e-12 * hbar;
        Ok(SmoothingKernel { sx, sp, measure, quantum })
    }

    /// Kernel at the vacuum deviations of the basis scale `sigma`, i.e. at
    /// the quantum measure `ħ/2`.
    pub fn quantum(sigma: f64, hbar: f64) -> Result<Self> {
        Self::new(sigma, hbar / (2.0 * sigma), hbar)
    }
}

/// Discrete one-dimensional kernel normalized so that its sum over the
/// infinite lattice is one.
fn lattice_kernel(s: f64, h: f64, taps: usize) -> Vec<f64> {
    let g = |k: f64| (-0.5 * (k * h / s).powi(2)).exp();
    let reach = ((40.0 * s / h).ceil() as usize).max(taps);
    let total: f64 = g(0.0) + 2.0 * (1..=reach).map(|k| g(k as f64)).sum::<f64>();
    (0..=taps).map(|k| g(k as f64) / total).collect()
}

fn convolve_axis(data: &Array2<f64>, kernel: &[f64], axis: usize) -> Array2<f64> {
    let (nx, np) = data.dim();
    let taps = kernel.len() as isize - 1;
    let len = if axis == 0 { nx } else { np } as isize;
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            (0..np)
                .map(|j| {
                    let centre = if axis == 0 { i } else { j } as isize;
                    let lo = (centre - taps).max(0);
                    let hi = (centre + taps).min(len - 1);
                    (lo..=hi)
                        .map(|k| {
                            let v = if axis == 0 { data[(k as usize, j)] } else { data[(i, k as usize)] };
                            kernel[(k - centre).unsigned_abs()] * v
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Array2::from_shape_fn((nx, np), |(i, j)| rows[i][j])
}

/// Convolution of a Wigner field with the unit-mass Gaussian
/// `exp(−Δx²/2sx² − Δp²/2sp²) / (2π sx sp)`.
///
/// The field is taken to vanish outside its grid, so the grid should extend
/// a few kernel widths past the state's support.
pub fn gaussian_smooth(field: &ScalarField, kernel: &SmoothingKernel) -> Result<ScalarField> {
    if field.kind() != FieldKind::Wigner {
        return Err(Error::InvalidParameter(format!("smoothing expects a Wigner field, got {:?}", field.kind())));
    }
    let g = field.grid();
    let (wx, wp) = (g.x_max - g.x_min, g.p_max - g.p_min);
    if 8.0 * kernel.sx > wx || 8.0 * kernel.sp > wp {
        return Err(Error::InvalidParameter(format!(
            "kernel ({:e}, {:e}) is too wide for a {wx:e} x {wp:e} grid",
            kernel.sx, kernel.sp
        )));
    }
    let taps = |s: f64, h: f64, n: usize| ((12.0 * s / h).ceil() as usize).min(n - 1);
    let kx = lattice_kernel(kernel.sx, g.dx(), taps(kernel.sx, g.dx(), g.nx));
    let kp = lattice_kernel(kernel.sp, g.dp(), taps(kernel.sp, g.dp(), g.np));
    let values = convolve_axis(&convolve_axis(field.values(), &kx, 0), &kp, 1);
    ScalarField::new(*g, values, FieldKind::Smoothed)
}

/// Husimi function `Q(x,p) = ⟨α|ρ̂|α⟩ / 2πħ` with
/// `α = x/(2σ_x) + i p/(2σ_p)`, so that `∬ Q dx dp = 1`.
///
/// The overlap with a truncated `ρ̂` only involves the first `dim` coherent
/// coefficients, so the result is exact for the given matrix.
pub fn husimi(rho: &FockDensityMatrix, grid: &PhaseGrid) -> Result<ScalarField> {
    grid.validate()?;
    if (grid.hbar - rho.hbar()).abs() > 1e-15 * rho.hbar() {
        return Err(Error::InvalidParameter("grid and state disagree on hbar".into()));
    }
    let dim = rho.dim();
    let (sx, sp) = (rho.sigma_x(), rho.sigma_p());
    let norm = 1.0 / (2.0 * PI * rho.hbar());
    let entries = rho.entries();
    let rows: Vec<Vec<f64>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            let mut c = vec![Complex64::new(0.0, 0.0); dim];
            (0..grid.np)
                .map(|j| {
                    let alpha = Complex64::new(grid.x(i) / (2.0 * sx), grid.p(j) / (2.0 * sp));
                    c[0] = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
                    for n in 1..dim {
                        c[n] = c[n - 1] * alpha / (n as f64).sqrt();
                    }
                    let mut q = Complex64::new(0.0, 0.0);
                    for n in 0..dim {
                        let mut col = Complex64::new(0.0, 0.0);
                        for m in 0..dim {
                            col += c[m].conj() * entries[(m, n)];
                        }
                        q += col * c[n];
                    }
                    // guard against rounding just below zero
                    q.re.max(0.0) * norm
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn((grid.nx, grid.np), |(i, j)| rows[i][j]);
    ScalarField::new(*grid, values, FieldKind::Husimi)
}

/// Outcome of comparing the smoothed Wigner function against the Husimi
/// function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiIdentityReport {
    pub kernel: SmoothingKernel,
    /// `max |smoothed W − Q|` over the grid.
    pub discrepancy: f64,
    pub smoothed_min: f64,
    pub passes: bool,
    pub quantum: bool,
}

/// Compares `gaussian_smooth(W_ρ)` at the vacuum deviations of `ρ`'s basis
/// with `husimi(ρ)`.
pub fn verify_husimi_identity(rho: &FockDensityMatrix, grid: &PhaseGrid) -> Result<HusimiIdentityReport> {
    let kernel = SmoothingKernel::quantum(rho.sigma(), rho.hbar())?;
    verify_husimi_identity_with(rho, grid, &kernel)
}

/// Same comparison with an arbitrary kernel; the identity only holds at the
/// quantum measure with the vacuum split of widths.
pub fn verify_husimi_identity_with(rho: &FockDensityMatrix, grid: &PhaseGrid, kernel: &SmoothingKernel) -> Result<HusimiIdentityReport> {
    let w = wigner_from_weyl(rho, grid)?;
    let smoothed = gaussian_smooth(&w, kernel)?;
    let q = husimi(rho, grid)?;
    let discrepancy = smoothed
        .values()
        .iter()
        .zip(q.values().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(HusimiIdentityReport {
        kernel: *kernel,
        discrepancy,
        smoothed_min: smoothed.min(),
        passes: discrepancy <= HUSIMI_IDENTITY_TOL,
        quantum: kernel.quantum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::wigner_fock_analytic;
    use crate::states::{coherent_state, fock_state, CoherentAmplitude, PhysicsConfig};

    fn cfg() -> PhysicsConfig {
        PhysicsConfig::default().with_cutoff(12).unwrap()
    }

    fn grid(c: &PhysicsConfig, n: usize) -> PhaseGrid {
        PhaseGrid::symmetric(8.0 * c.sigma_x(), 8.0 * c.sigma_p(), n, n, c.hbar).unwrap()
    }

    #[test]
    fn kernel_flags_quantum_measure() {
        let c = cfg();
        assert!(SmoothingKernel::quantum(c.sigma, c.hbar).unwrap().quantum);
        let k = SmoothingKernel::new(c.sigma_x(), 2.0 * c.sigma_p(), c.hbar).unwrap();
        assert!(!k.quantum);
        assert!((k.measure - c.hbar).abs() < 1e-15);
        assert!(SmoothingKernel::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smoothing_preserves_mass_and_adds_variances() {
        let c = cfg();
        let g = grid(&c, 129);
        let w = wigner_fock_analytic(0, &g, c.sigma).unwrap();
        let s = gaussian_smooth(&w, &SmoothingKernel::quantum(c.sigma, c.hbar).unwrap()).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-6);
        let (sx, sp) = (c.sigma_x(), c.sigma_p());
        for i in (0..129).step_by(8) {
            for j in (0..129).step_by(8) {
                let (x, p) = (g.x(i), g.p(j));
                let want = (-x * x / (4.0 * sx * sx) - p * p / (4.0 * sp * sp)).exp() / (2.0 * PI * c.hbar);
                assert!((s.at(i, j) - want).abs() < 1e-9);
            }
        }
        assert!((s.at(64, 64) - 1.0 / (2.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn narrow_kernel_is_nearly_identity() {
        let c = cfg();
        let g = grid(&c, 129);
        let w = wigner_fock_analytic(1, &g, c.sigma).unwrap();
        let k = SmoothingKernel::new(c.sigma_x() / 50.0, c.sigma_p() / 50.0, c.hbar).unwrap();
        let s = gaussian_smooth(&w, &k).unwrap();
        assert!(s.max_abs_diff(&ScalarField::new(g, w.values().clone(), FieldKind::Smoothed).unwrap()).unwrap() < 1e-3);
    }

    #[test]
    fn wide_kernel_is_rejected() {
        let c = cfg();
        let g = grid(&c, 33);
        let w = wigner_fock_analytic(0, &g, c.sigma).unwrap();
        let k = SmoothingKernel::new(10.0 * c.sigma_x(), c.sigma_p(), c.hbar).unwrap();
        assert!(gaussian_smooth(&w, &k).is_err());
    }

    #[test]
    fn husimi_of_vacuum_and_coherent_peak() {
        let c = cfg();
        let g = grid(&c, 65);
        let q = husimi(&fock_state(0, &c).unwrap(), &g).unwrap();
        assert!((q.at(32, 32) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((q.mass() - 1.0).abs() < 1e-6);
        let q1 = husimi(&fock_state(1, &c).unwrap(), &g).unwrap();
        assert!(q1.min() >= -1e-12);

        let c = PhysicsConfig::default().with_cutoff(40).unwrap();
        let alpha = CoherentAmplitude::new(Complex64::new(1.2, -0.7), c.sigma);
        let rho = coherent_state(alpha, &c).unwrap();
        let q = husimi(&rho, &g).unwrap();
        let (i, j) = q.argmax();
        let (x0, p0) = alpha.center(c.hbar);
        assert!((g.x(i) - x0).abs() <= g.dx() && (g.p(j) - p0).abs() <= g.dp());
    }

    #[test]
    fn identity_holds_only_at_quantum_measure() {
        let c = cfg();
        let g = grid(&c, 96);
        for n in [0, 1] {
            let r = verify_husimi_identity(&fock_state(n, &c).unwrap(), &g).unwrap();
            assert!(r.passes && r.quantum, "n={n}: {}", r.discrepancy);
            assert!(r.smoothed_min >= -1e-10);
        }
        let rho = fock_state(0, &c).unwrap();
        let s = 2f64.sqrt();
        let k = SmoothingKernel::new(s * c.sigma_x(), s * c.sigma_p(), c.hbar).unwrap();
        let r = verify_husimi_identity_with(&rho, &g, &k).unwrap();
        assert!(!r.passes && !r.quantum);

        let rho1 = fock_state(1, &c).unwrap();
        let s = 0.5f64.sqrt();
        let k = SmoothingKernel::new(s * c.sigma_x(), s * c.sigma_p(), c.hbar).unwrap();
        let r = verify_husimi_identity_with(&rho1, &g, &k).unwrap();
        assert!(r.smoothed_min < -1e-6);
    }
}

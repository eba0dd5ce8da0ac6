//! Nonclassicality measures: Wigner negativity, and distance from the
//! best-fitting quasiclassical (coherent) state.
//!
//! For a ladder operator `b̂ = x̂/(2s) + i s p̂/ħ` at trial width `s`, the mean
//! excitation of the state displaced to zero mean is
//! `n̄(s) = V_x/(4s²) + s² V_p/ħ² − 1/2`, minimized at
//! `s⁴ = ħ² V_x / (4 V_p)` with `n̄_min = σ_x σ_p/ħ − 1/2`. It vanishes exactly
//! for minimum-uncertainty states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, PhaseGrid, ScalarField};
use crate::phase_space::wigner_from_weyl;
use crate::special::hermite_functions_into;
use crate::states::{hermite_band, line_nodes, CoherentAmplitude, FockDensityMatrix, PositionWavefunction, Profile};

/// `n̄_min` below this is reported as classical.
pub const CLASSICAL_THRESHOLD: f64 = 1e-6;
/// Golden-section stopping width in `ln s`.
const LOG_WIDTH_TOL: f64 = 1e-10;
/// Largest accepted `1 − Σ|ψ_n|²` of a displaced expansion.
const EXPANSION_DEFICIT_TOL: f64 = 1e-8;

/// Means and deviations of position and momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDeviations {
    pub sigma_x: f64,
    pub sigma_p: f64,
    pub mean_x: f64,
    pub mean_p: f64,
}

/// Moments from `x̂ = σ_x(â + â†)` and `p̂ = iσ_p(â† − â)`; exact for the
/// truncated matrix.
pub fn state_deviations(rho: &FockDensityMatrix) -> StateDeviations {
    let m = rho.ladder_moments();
    let (sx, sp) = (rho.sigma_x(), rho.sigma_p());
    let (mean_x, mean_p) = m.mean_position(rho.sigma(), rho.hbar());
    let x2 = sx * sx * (2.0 * m.a2.re + 2.0 * m.number + 1.0);
    let p2 = sp * sp * (2.0 * m.number + 1.0 - 2.0 * m.a2.re);
    StateDeviations {
        sigma_x: (x2 - mean_x * mean_x).max(0.0).sqrt(),
        sigma_p: (p2 - mean_p * mean_p).max(0.0).sqrt(),
        mean_x,
        mean_p,
    }
}

/// `⟨b̂†b̂⟩` of the state displaced to zero mean, with `b̂` the ladder
/// operator at width `s`.
///
/// Written through the basis ladder operator: `b̂ = μâ + νâ†` with
/// `μ = (σ/s + s/σ)/2`, `ν = (σ/s − s/σ)/2`, so
/// `n̄ = (μ² + ν²)⟨â†â⟩_c + ν² + 2μν Re⟨â²⟩_c` in centred moments.
pub fn mean_excitation(rho: &FockDensityMatrix, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("trial width must be positive, got {s}")));
    }
    let m = rho.ladder_moments();
    let r = rho.sigma() / s;
    let (mu, nu) = (0.5 * (r + 1.0 / r), 0.5 * (r - 1.0 / r));
    let number_c = m.number - m.a.norm_sqr();
    let a2_c = m.a2 - m.a * m.a;
    Ok((mu * mu + nu * nu) * number_c + nu * nu + 2.0 * mu * nu * a2_c.re)
}

/// Minimum of `n̄(s)` over the trial width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationMinimum {
    pub sigma_opt: f64,
    pub n_bar_min: f64,
    /// `σ_x σ_p / ħ − 1/2` from the deviations.
    pub closed_form: f64,
}

/// Golden-section search in `ln s`, starting from `[σ_x/10, 10σ_x]` and
/// widening the bracket geometrically if the minimum sits on its edge.
pub fn minimize_excitation(rho: &FockDensityMatrix) -> Result<ExcitationMinimum> {
    let dev = state_deviations(rho);
    let centre = if dev.sigma_x > 0.0 { dev.sigma_x } else { rho.sigma() };
    let f = |t: f64| mean_excitation(rho, t.exp());
    let (mut lo, mut hi) = ((centre / 10.0).ln(), (centre * 10.0).ln());
    for _ in 0..60 {
        let (t, v) = golden_section(&f, lo, hi)?;
        let width = hi - lo;
        if t - lo < 1e-3 * width {
            lo -= width;
        } else if hi - t < 1e-3 * width {
            hi += width;
        } else {
            return Ok(ExcitationMinimum {
                sigma_opt: t.exp(),
                n_bar_min: v,
                closed_form: dev.sigma_x * dev.sigma_p / rho.hbar() - 0.5,
            });
        }
    }
    Err(Error::Inconsistent("mean excitation has no interior minimum".into()))
}

fn golden_section<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > LOG_WIDTH_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)?))
}

/// Coefficients of a state in the displaced number basis `D̂(α)|n⟩` at the
/// width of `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacedExpansion {
    pub alpha: CoherentAmplitude,
    pub coeffs: Vec<Complex64>,
    /// `|ψ_0|²`, the overlap with the coherent state `|α⟩`.
    pub psi0_sq: f64,
    /// `1 − |ψ_0|²`, the squared norm of the part orthogonal to `|α⟩`.
    pub distance_sq: f64,
    /// `Σ n |ψ_n|²`
    pub mean_excitation: f64,
    /// `1 − Σ |ψ_n|²`
    pub deficit: f64,
}

/// `ψ_n = ∫ conj(χ_n(x)) ψ(x) dx` with the displaced number functions
/// `χ_n(x) = e^{−ip₀x₀/2ħ} e^{ip₀x/ħ} φ_n(x − x₀)` centred on `α`.
pub fn displaced_expansion(psi: &PositionWavefunction, alpha: CoherentAmplitude, n_terms: usize) -> Result<DisplacedExpansion> {
    if n_terms == 0 {
        return Err(Error::InvalidParameter("expansion needs at least one term".into()));
    }
    if !(alpha.sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("expansion width must be positive, got {}", alpha.sigma)));
    }
    let hbar = psi.hbar();
    let s = alpha.sigma;
    let (x0, p0) = alpha.center(hbar);
    let (lo, hi) = psi.support();
    let reach = s * (((4 * n_terms + 2) as f64).sqrt() + 13.0);
    let (lo, hi) = (lo.max(x0 - reach), hi.min(x0 + reach));
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n_terms];
    if hi > lo {
        let band = psi.band() + hermite_band(n_terms - 1, s) + p0.abs() / hbar;
        let (nodes, h) = line_nodes(lo, hi, std::f64::consts::PI / band);
        let mut phi = vec![0.0; n_terms];
        for &x in &nodes {
            hermite_functions_into(x - x0, s, &mut phi);
            // conj of the plane-wave factor times ψ
            let v = psi.eval(x) * Complex64::from_polar(h, -p0 * (x - 0.5 * x0) / hbar);
            for (c, f) in coeffs.iter_mut().zip(&phi) {
                *c += v * f;
            }
        }
    }
    let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let deficit = 1.0 - captured;
    if deficit > EXPANSION_DEFICIT_TOL {
        return Err(Error::Truncation { tail: deficit, tol: EXPANSION_DEFICIT_TOL, required: 2 * n_terms });
    }
    let psi0_sq = coeffs[0].norm_sqr();
    let mean_excitation = coeffs.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum();
    Ok(DisplacedExpansion { alpha, coeffs, psi0_sq, distance_sq: (1.0 - psi0_sq).max(0.0), mean_excitation, deficit })
}

/// Expansion of a pure density matrix; fails for mixed states.
pub fn displaced_expansion_density(rho: &FockDensityMatrix, alpha: CoherentAmplitude, n_terms: usize) -> Result<DisplacedExpansion> {
    let v = rho
        .pure_vector(1e-10)
        .ok_or_else(|| Error::InvalidDensity("displaced expansion needs a pure state".into()))?;
    let psi = PositionWavefunction::new(
        Profile::FockSeries { coeffs: v.iter().copied().collect(), width: rho.sigma() },
        rho.sigma(),
        rho.hbar(),
    )?;
    displaced_expansion(&psi, alpha, n_terms)
}

/// Minimum of a Wigner field and its negativity volume `∬ (|W| − W)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityMeasures {
    pub min_value: f64,
    pub negativity_volume: f64,
}

pub fn negativity_measures(field: &ScalarField) -> Result<NegativityMeasures> {
    if field.kind() != FieldKind::Wigner {
        return Err(Error::InvalidParameter(format!("negativity is measured on Wigner fields, got {:?}", field.kind())));
    }
    let g = field.grid();
    let (wx, wp) = (g.x_weights(), g.p_weights());
    let negativity_volume = field
        .values()
        .indexed_iter()
        .map(|((i, j), v)| if *v < 0.0 { -v * wx[i] * wp[j] } else { 0.0 })
        .sum();
    Ok(NegativityMeasures { min_value: field.min(), negativity_volume })
}

/// Everything measured about one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonclassicalityReport {
    pub sigma_x_state: f64,
    pub sigma_p_state: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub sigma_opt: f64,
    pub n_bar_min: f64,
    /// `σ_x σ_p/ħ − 1/2`
    pub n_bar_closed_form: f64,
    pub negativity_min: f64,
    pub negativity_volume: f64,
    /// Overlap with the best-fitting coherent state (pure states only).
    pub psi0_sq: Option<f64>,
    pub distance_sq: Option<f64>,
    /// `|ψ_n|²` in the displaced basis at the optimum (pure states only).
    pub expansion_weights: Option<Vec<f64>>,
    pub classical: bool,
}

impl NonclassicalityReport {
    /// One-line verdict.
    pub fn verdict(&self) -> String {
        if self.classical {
            format!("classical: n_bar_min = {:.3e}, negativity_volume = {:.3e}", self.n_bar_min, self.negativity_volume)
        } else {
            format!(
                "nonclassical: n_bar_min = {:.6}, sigma_opt = {:.6}, negativity_min = {:.6}, negativity_volume = {:.6}",
                self.n_bar_min, self.sigma_opt, self.negativity_min, self.negativity_volume
            )
        }
    }
}

/// Full report: deviations, optimal width, minimized excitation, Wigner
/// negativity on `grid`, and for pure states the expansion around the best
/// coherent state.
pub fn nonclassicality_report(rho: &FockDensityMatrix, grid: &PhaseGrid) -> Result<NonclassicalityReport> {
    let dev = state_deviations(rho);
    let opt = minimize_excitation(rho)?;
    let neg = negativity_measures(&wigner_from_weyl(rho, grid)?)?;
    let (psi0_sq, distance_sq, expansion_weights) = if rho.pure_vector(1e-10).is_some() {
        let alpha = CoherentAmplitude::from_center(dev.mean_x, dev.mean_p, opt.sigma_opt, rho.hbar());
        let exp = displaced_expansion_density(rho, alpha, rho.dim().max(64))?;
        (Some(exp.psi0_sq), Some(exp.distance_sq), Some(exp.coeffs.iter().map(|c| c.norm_sqr()).collect()))
    } else {
        (None, None, None)
    };
    Ok(NonclassicalityReport {
        sigma_x_state: dev.sigma_x,
        sigma_p_state: dev.sigma_p,
        mean_x: dev.mean_x,
        mean_p: dev.mean_p,
        sigma_opt: opt.sigma_opt,
        n_bar_min: opt.n_bar_min,
        n_bar_closed_form: opt.closed_form,
        negativity_min: neg.min_value,
        negativity_volume: neg.negativity_volume,
        psi0_sq,
        distance_sq,
        expansion_weights,
        classical: opt.n_bar_min < CLASSICAL_THRESHOLD,
    })
}

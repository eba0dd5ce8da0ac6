//! Single-mode states in a truncated number basis and in the position
//! representation.
//!
//! The ladder operator at length scale `σ` is `â = x̂/(2σ_x) + i p̂/(2σ_p)`
//! with `σ_x = σ` and `σ_p = ħ/(2σ)`. With this choice `x̂ = σ_x(â + â†)`,
//! `p̂ = iσ_p(â† − â)`, and a coherent state `|α⟩` sits at
//! `(2σ_x Re α, 2σ_p Im α)` in phase space.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::hermite_functions_into;

/// Units and truncation settings shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub hbar: f64,
    /// Length scale of the number basis (`σ_x` of its ground state).
    pub sigma: f64,
    pub fock_cutoff: usize,
    pub tol_trace: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            hbar: 1.0,
            sigma: std::f64::consts::FRAC_1_SQRT_2,
            fock_cutoff: 48,
            tol_trace: 1e-10,
        }
    }
}

impl PhysicsConfig {
    pub fn new(hbar: f64, sigma: f64, fock_cutoff: usize) -> Result<Self> {
        let cfg = PhysicsConfig { hbar, sigma, fock_cutoff, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_cutoff(mut self, fock_cutoff: usize) -> Result<Self> {
        self.fock_cutoff = fock_cutoff;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.fock_cutoff < 2 {
            return Err(Error::InvalidParameter(format!(
                "fock_cutoff must be at least 2, got {}",
                self.fock_cutoff
            )));
        }
        if !(self.tol_trace.is_finite() && self.tol_trace > 0.0) {
            return Err(Error::InvalidParameter(format!("tol_trace must be positive, got {}", self.tol_trace)));
        }
        Ok(())
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_p(&self) -> f64 {
        self.hbar / (2.0 * self.sigma)
    }
}

/// Density operator in the number basis of an oscillator with length scale
/// `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    entries: DMatrix<Complex64>,
    hbar: f64,
    sigma: f64,
}

impl FockDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity within `tol`, then
    /// stores an exactly Hermitian copy.
    pub fn from_entries(entries: DMatrix<Complex64>, hbar: f64, sigma: f64, tol: f64) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() {
            return Err(Error::InvalidDensity(format!("matrix is {}x{}, not square", n, entries.ncols())));
        }
        if n < 1 {
            return Err(Error::InvalidDensity("empty matrix".into()));
        }
        if !(hbar > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidParameter("hbar and sigma must be positive".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensity("non-finite entry".into()));
        }
        let mut herm_dev = 0.0f64;
        for m in 0..n {
            for k in 0..n {
                herm_dev = herm_dev.max((entries[(m, k)] - entries[(k, m)].conj()).norm());
            }
        }
        if herm_dev > tol {
            return Err(Error::InvalidDensity(format!("not Hermitian: deviation {herm_dev:.3e}")));
        }
        let rho = Self { entries: hermitize(entries), hbar, sigma };
        let tr = rho.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from 1 by more than {tol:.1e}")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(rho)
    }

    /// Projector onto the normalized vector `coeffs`.
    pub fn pure(coeffs: &[Complex64], hbar: f64, sigma: f64) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidDensity("state vector has zero norm".into()));
        }
        let c: Vec<Complex64> = coeffs.iter().map(|z| z / norm).collect();
        let n = c.len();
        let entries = DMatrix::from_fn(n, n, |m, k| c[m] * c[k].conj());
        Ok(Self { entries: hermitize(entries), hbar, sigma })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_p(&self) -> f64 {
        self.hbar / (2.0 * self.sigma)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Population `ρ_nn` of each number state.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }

    /// State vector of a rank-one density, phase fixed so its largest
    /// component is real and positive. `None` if the state is mixed beyond
    /// `tol`.
    pub fn pure_vector(&self, tol: f64) -> Option<DVector<Complex64>> {
        if (self.purity() - 1.0).abs() > tol {
            return None;
        }
        let eig = self.entries.clone().symmetric_eigen();
        let (idx, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        let mut v: DVector<Complex64> = eig.eigenvectors.column(idx).into_owned();
        let (imax, _) = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
        let phase = v[imax].conj() / v[imax].norm();
        v *= phase;
        Some(v)
    }

    /// `⟨â⟩`, `⟨â²⟩` and `⟨â†â⟩` at the basis scale. Exact for the truncated
    /// matrix, since the ladder operator never maps into the discarded levels
    /// from below.
    pub fn ladder_moments(&self) -> LadderMoments {
        let e = &self.entries;
        let n = self.dim();
        let a = (0..n.saturating_sub(1)).map(|k| e[(k + 1, k)] * ((k + 1) as f64).sqrt()).sum();
        let a2 = (0..n.saturating_sub(2)).map(|k| e[(k + 2, k)] * (((k + 1) * (k + 2)) as f64).sqrt()).sum();
        let number = (0..n).map(|k| k as f64 * e[(k, k)].re).sum();
        LadderMoments { a, a2, number }
    }

    /// Convex combination `w·self + (1-w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.dim() != other.dim() || self.hbar != other.hbar || self.sigma != other.sigma {
            return Err(Error::InvalidParameter("mixing densities with different bases".into()));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0,1]")));
        }
        let entries = self.entries.map(|z| z * w) + other.entries.map(|z| z * (1.0 - w));
        Ok(Self { entries: hermitize(entries), hbar: self.hbar, sigma: self.sigma })
    }

    pub(crate) fn from_raw(entries: DMatrix<Complex64>, hbar: f64, sigma: f64) -> Self {
        Self { entries: hermitize(entries), hbar, sigma }
    }

    pub fn to_document(&self) -> DensityDocument {
        let n = self.dim();
        DensityDocument {
            dim: n,
            hbar: self.hbar,
            sigma: self.sigma,
            re: (0..n).map(|m| (0..n).map(|k| self.entries[(m, k)].re).collect()).collect(),
            im: (0..n).map(|m| (0..n).map(|k| self.entries[(m, k)].im).collect()).collect(),
        }
    }

    pub fn from_document(doc: &DensityDocument, tol: f64) -> Result<Self> {
        let n = doc.dim;
        if doc.re.len() != n || doc.im.len() != n || doc.re.iter().chain(&doc.im).any(|r| r.len() != n) {
            return Err(Error::InvalidDensity(format!("document rows do not match dim {n}")));
        }
        let entries = DMatrix::from_fn(n, n, |m, k| Complex64::new(doc.re[m][k], doc.im[m][k]));
        Self::from_entries(entries, doc.hbar, doc.sigma, tol)
    }
}

/// Copies the lower triangle onto the upper one so `ρ = ρ†` holds bit for bit.
fn hermitize(mut m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    m
}

/// First and second ladder-operator moments of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderMoments {
    pub a: Complex64,
    pub a2: Complex64,
    pub number: f64,
}

impl LadderMoments {
    /// Mean phase-space position `(⟨x̂⟩, ⟨p̂⟩) = (2σ_x Re⟨â⟩, 2σ_p Im⟨â⟩)`.
    pub fn mean_position(&self, sigma: f64, hbar: f64) -> (f64, f64) {
        (2.0 * sigma * self.a.re, hbar / sigma * self.a.im)
    }
}

/// JSON form of a density: `{dim, hbar, sigma, re, im}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityDocument {
    pub dim: usize,
    pub hbar: f64,
    pub sigma: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Eigenvalue `α` of the ladder operator at scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude {
    pub alpha: Complex64,
    pub sigma: f64,
}

impl CoherentAmplitude {
    pub fn new(alpha: Complex64, sigma: f64) -> Self {
        CoherentAmplitude { alpha, sigma }
    }

    /// Phase-space centre `(x, p)` of `|α⟩`.
    pub fn center(&self, hbar: f64) -> (f64, f64) {
        let sigma_p = hbar / (2.0 * self.sigma);
        (2.0 * self.sigma * self.alpha.re, 2.0 * sigma_p * self.alpha.im)
    }

    /// Amplitude whose coherent state is centred at `(x, p)`.
    pub fn from_center(x: f64, p: f64, sigma: f64, hbar: f64) -> Self {
        let sigma_p = hbar / (2.0 * sigma);
        CoherentAmplitude { alpha: Complex64::new(x / (2.0 * sigma), p / (2.0 * sigma_p)), sigma }
    }
}

/// Shape of a position-space wavefunction.
#[derive(Clone)]
pub enum Profile {
    /// `(2πw²)^{-1/4} exp(-(x-x0)²/4w² + i p0 (x - x0/2)/ħ)`.
    Gaussian { width: f64, x0: f64, p0: f64 },
    /// Normalized sum of two ground-state Gaussians at `±a`.
    Cat { a: f64, width: f64 },
    /// Oscillator eigenfunction `φ_n` at scale `width`.
    Fock { n: usize, width: f64 },
    /// `Σ c_n φ_n(x)` at scale `width`.
    FockSeries { coeffs: Vec<Complex64>, width: f64 },
    /// Caller-supplied amplitude with declared support and smallest feature
    /// length.
    Sampled {
        f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
        support: (f64, f64),
        feature_length: f64,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Gaussian { width, x0, p0 } => {
                f.debug_struct("Gaussian").field("width", width).field("x0", x0).field("p0", p0).finish()
            }
            Profile::Cat { a, width } => f.debug_struct("Cat").field("a", a).field("width", width).finish(),
            Profile::Fock { n, width } => f.debug_struct("Fock").field("n", n).field("width", width).finish(),
            Profile::FockSeries { coeffs, width } => f
                .debug_struct("FockSeries")
                .field("terms", &coeffs.len())
                .field("width", width)
                .finish(),
            Profile::Sampled { support, feature_length, .. } => f
                .debug_struct("Sampled")
                .field("support", support)
                .field("feature_length", feature_length)
                .finish(),
        }
    }
}

/// Normalized wavefunction `ψ(x)` plus the reference scale `sigma` of the
/// number basis it is compared against.
#[derive(Debug, Clone)]
pub struct PositionWavefunction {
    profile: Profile,
    sigma: f64,
    hbar: f64,
}

/// Hermite functions decay below ~1e-18 of their peak this many widths past
/// the classical turning point.
const TAIL_WIDTHS: f64 = 13.0;

impl PositionWavefunction {
    pub fn new(profile: Profile, sigma: f64, hbar: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let ok = match &profile {
            Profile::Gaussian { width, x0, p0 } => *width > 0.0 && x0.is_finite() && p0.is_finite(),
            Profile::Cat { a, width } => *width > 0.0 && *a >= 0.0 && a.is_finite(),
            Profile::Fock { width, .. } => *width > 0.0,
            Profile::FockSeries { coeffs, width } => *width > 0.0 && !coeffs.is_empty(),
            Profile::Sampled { support, feature_length, .. } => support.1 > support.0 && *feature_length > 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid wavefunction profile {profile:?}")));
        }
        Ok(PositionWavefunction { profile, sigma, hbar })
    }

    /// Oscillator ground state at scale `sigma`.
    pub fn ground(sigma: f64, hbar: f64) -> Result<Self> {
        Self::new(Profile::Gaussian { width: sigma, x0: 0.0, p0: 0.0 }, sigma, hbar)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match &self.profile {
            Profile::Gaussian { width, x0, p0 } => {
                let amp = gaussian(x - x0, *width);
                let phase = p0 * (x - 0.5 * x0) / self.hbar;
                Complex64::from_polar(amp, phase)
            }
            Profile::Cat { a, width } => {
                let denom = (2.0 * (1.0 + (-a * a / (2.0 * width * width)).exp())).sqrt();
                Complex64::new((gaussian(x - a, *width) + gaussian(x + a, *width)) / denom, 0.0)
            }
            Profile::Fock { n, width } => {
                let mut buf = vec![0.0; n + 1];
                hermite_functions_into(x, *width, &mut buf);
                Complex64::new(buf[*n], 0.0)
            }
            Profile::FockSeries { coeffs, width } => {
                let mut buf = vec![0.0; coeffs.len()];
                hermite_functions_into(x, *width, &mut buf);
                coeffs.iter().zip(&buf).map(|(c, phi)| c * phi).sum()
            }
            Profile::Sampled { f, .. } => f(x),
        }
    }

    /// Interval outside which `|ψ|` is negligible.
    pub fn support(&self) -> (f64, f64) {
        match &self.profile {
            Profile::Gaussian { width, x0, .. } => (x0 - TAIL_WIDTHS * width, x0 + TAIL_WIDTHS * width),
            Profile::Cat { a, width } => {
                let r = a + TAIL_WIDTHS * width;
                (-r, r)
            }
            Profile::Fock { n, width } => {
                let r = width * ((4 * n + 2) as f64).sqrt() + TAIL_WIDTHS * width;
                (-r, r)
            }
            Profile::FockSeries { coeffs, width } => {
                let r = width * ((4 * coeffs.len() - 2) as f64).sqrt() + TAIL_WIDTHS * width;
                (-r, r)
            }
            Profile::Sampled { support, .. } => *support,
        }
    }

    /// Wavenumber beyond which the Fourier transform of `ψ` is negligible.
    pub fn band(&self) -> f64 {
        match &self.profile {
            Profile::Gaussian { width, p0, .. } => 6.0 / width + p0.abs() / self.hbar,
            Profile::Cat { width, .. } => 6.0 / width,
            Profile::Fock { n, width } => hermite_band(*n, *width),
            Profile::FockSeries { coeffs, width } => hermite_band(coeffs.len() - 1, *width),
            Profile::Sampled { feature_length, .. } => 6.0 / feature_length,
        }
    }

    /// `∫|ψ|² dx` by trapezoid quadrature.
    pub fn norm_sq(&self) -> f64 {
        let (lo, hi) = self.support();
        let (nodes, h) = line_nodes(lo, hi, std::f64::consts::PI / self.band());
        nodes.iter().map(|&x| self.eval(x).norm_sqr()).sum::<f64>() * h
    }

    /// Momentum-space amplitude `(2πħ)^{-1/2} ∫ ψ(x) e^{-ipx/ħ} dx`.
    pub fn momentum_amplitude(&self, p: f64) -> Complex64 {
        let (lo, hi) = self.support();
        let k = p / self.hbar;
        let (nodes, h) = line_nodes(lo, hi, 2.0 * std::f64::consts::PI / (2.0 * (self.band() + k.abs())));
        let sum: Complex64 = nodes.iter().map(|&x| self.eval(x) * Complex64::from_polar(1.0, -k * x)).sum();
        sum * h / (2.0 * std::f64::consts::PI * self.hbar).sqrt()
    }

    /// `⟨x⟩` and `⟨x²⟩` by quadrature.
    pub fn position_moments(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        let (nodes, h) = line_nodes(lo, hi, std::f64::consts::PI / self.band());
        let (mut m1, mut m2) = (0.0, 0.0);
        for &x in &nodes {
            let w = self.eval(x).norm_sqr() * h;
            m1 += x * w;
            m2 += x * x * w;
        }
        (m1, m2)
    }
}

pub(crate) fn hermite_band(n: usize, width: f64) -> f64 {
    (((4 * n + 2) as f64).sqrt() + 12.0) / (2.0 * width)
}

fn gaussian(x: f64, width: f64) -> f64 {
    (2.0 * std::f64::consts::PI * width * width).powf(-0.25) * (-x * x / (4.0 * width * width)).exp()
}

/// Uniform nodes covering `[lo, hi]` with spacing at most `h_max`. An odd
/// count is used so an interval symmetric about zero has a node at zero.
pub(crate) fn line_nodes(lo: f64, hi: f64, h_max: f64) -> (Vec<f64>, f64) {
    let mut n = ((hi - lo) / h_max).ceil() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    n = n.max(3);
    let h = (hi - lo) / (n - 1) as f64;
    let mid = 0.5 * (lo + hi);
    let half = (n - 1) / 2;
    let nodes = (0..n).map(|i| mid + (i as f64 - half as f64) * h).collect();
    (nodes, h)
}

/// Number state `|n⟩⟨n|`.
pub fn fock_state(n: usize, cfg: &PhysicsConfig) -> Result<FockDensityMatrix> {
    cfg.validate()?;
    if n >= cfg.fock_cutoff {
        return Err(Error::IndexOutOfRange { index: n, cutoff: cfg.fock_cutoff });
    }
    let mut c = vec![Complex64::new(0.0, 0.0); cfg.fock_cutoff];
    c[n] = Complex64::new(1.0, 0.0);
    FockDensityMatrix::pure(&c, cfg.hbar, cfg.sigma)
}

/// Number-basis amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n < len`, plus the
/// weight `1 − Σ|c_n|²` they leave out.
pub fn coherent_coefficients(alpha: Complex64, len: usize) -> (Vec<Complex64>, f64) {
    let mut c = Vec::with_capacity(len);
    let mut cur = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    let mut kept = 0.0;
    for n in 0..len {
        if n > 0 {
            cur = cur * alpha / (n as f64).sqrt();
        }
        kept += cur.norm_sqr();
        c.push(cur);
    }
    (c, (1.0 - kept).max(0.0))
}

/// Coherent state `|α⟩` in the number basis at scale `alpha.sigma`.
pub fn coherent_state(alpha: CoherentAmplitude, cfg: &PhysicsConfig) -> Result<FockDensityMatrix> {
    cfg.validate()?;
    if !(alpha.sigma > 0.0) || !alpha.alpha.re.is_finite() || !alpha.alpha.im.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid coherent amplitude {alpha:?}")));
    }
    let (c, tail) = coherent_coefficients(alpha.alpha, cfg.fock_cutoff);
    if tail > cfg.tol_trace {
        let mut required = cfg.fock_cutoff;
        loop {
            required += 1;
            let (_, t) = coherent_coefficients(alpha.alpha, required);
            if t <= cfg.tol_trace || required > 1 << 16 {
                break;
            }
        }
        return Err(Error::Truncation { tail, tol: cfg.tol_trace, required });
    }
    FockDensityMatrix::pure(&c, cfg.hbar, alpha.sigma)
}

/// Even cat wavefunction `[ψ₀(x−a) + ψ₀(x+a)] / √(2(1 + e^{−a²/2σ²}))`.
pub fn cat_state(a: f64, sigma: f64, cfg: &PhysicsConfig) -> Result<PositionWavefunction> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("cat width must be positive, got {sigma}")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("cat separation must be non-negative, got {a}")));
    }
    PositionWavefunction::new(Profile::Cat { a, width: sigma }, sigma, cfg.hbar)
}

/// Overlaps `c_n = ∫ φ_n ψ dx` for `n < len` at scale `psi.sigma()`.
fn number_overlaps(psi: &PositionWavefunction, len: usize) -> Vec<Complex64> {
    let sigma = psi.sigma();
    let basis_r = sigma * ((4 * len + 2) as f64).sqrt() + TAIL_WIDTHS * sigma;
    let (lo, hi) = psi.support();
    let r = basis_r.max(lo.abs()).max(hi.abs());
    let band = psi.band() + hermite_band(len, sigma);
    let (nodes, h) = line_nodes(-r, r, std::f64::consts::PI / band);
    let mut c = vec![Complex64::new(0.0, 0.0); len];
    let mut phi = vec![0.0; len];
    for &x in &nodes {
        let v = psi.eval(x);
        if v.norm_sqr() == 0.0 {
            continue;
        }
        hermite_functions_into(x, sigma, &mut phi);
        for (cn, &p) in c.iter_mut().zip(&phi) {
            *cn += v * p;
        }
    }
    c.iter_mut().for_each(|z| *z *= h);
    c
}

/// Projects a wavefunction onto the truncated number basis at scale
/// `psi.sigma()`, failing when the basis misses more than `tol_trace` of it.
pub fn wavefunction_to_density(psi: &PositionWavefunction, cfg: &PhysicsConfig) -> Result<FockDensityMatrix> {
    cfg.validate()?;
    if (psi.hbar() - cfg.hbar).abs() > 1e-15 * cfg.hbar {
        return Err(Error::InvalidParameter("wavefunction and config disagree on hbar".into()));
    }
    let norm = psi.norm_sq();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("wavefunction norm {norm} is not 1")));
    }
    let c = number_overlaps(psi, cfg.fock_cutoff);
    let kept: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let deficit = (norm - kept).max(0.0);
    if deficit > cfg.tol_trace {
        let mut required = cfg.fock_cutoff;
        let cap = (8 * cfg.fock_cutoff).max(256);
        let ext = number_overlaps(psi, cap);
        let mut acc = 0.0;
        for (n, z) in ext.iter().enumerate() {
            acc += z.norm_sqr();
            if norm - acc <= cfg.tol_trace {
                required = n + 1;
                break;
            }
            required = cap + 1;
        }
        return Err(Error::Truncation { tail: deficit, tol: cfg.tol_trace, required });
    }
    FockDensityMatrix::pure(&c, cfg.hbar, psi.sigma())
}

/// Completeness deficit `1 − Σ|c_n|²` of the projection used by
/// [`wavefunction_to_density`].
pub fn completeness_deficit(psi: &PositionWavefunction, cutoff: usize) -> f64 {
    let c = number_overlaps(psi, cutoff);
    (psi.norm_sq() - c.iter().map(|z| z.norm_sqr()).sum::<f64>()).max(0.0)
}

/// Named pure states, serialized as `{kind, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum StateSpec {
    Vacuum,
    Fock { n: usize },
    Coherent { re: f64, im: f64 },
    /// Cat with component separation `a = a_over_sigma · σ`.
    Cat { a_over_sigma: f64 },
}

impl StateSpec {
    pub fn density(&self, cfg: &PhysicsConfig) -> Result<FockDensityMatrix> {
        match *self {
            StateSpec::Vacuum => fock_state(0, cfg),
            StateSpec::Fock { n } => fock_state(n, cfg),
            StateSpec::Coherent { re, im } => {
                coherent_state(CoherentAmplitude::new(Complex64::new(re, im), cfg.sigma), cfg)
            }
            StateSpec::Cat { .. } => wavefunction_to_density(&self.wavefunction(cfg)?, cfg),
        }
    }

    pub fn wavefunction(&self, cfg: &PhysicsConfig) -> Result<PositionWavefunction> {
        let s = cfg.sigma;
        match *self {
            StateSpec::Vacuum => PositionWavefunction::ground(s, cfg.hbar),
            StateSpec::Fock { n } => PositionWavefunction::new(Profile::Fock { n, width: s }, s, cfg.hbar),
            StateSpec::Coherent { re, im } => {
                let (x0, p0) = CoherentAmplitude::new(Complex64::new(re, im), s).center(cfg.hbar);
                PositionWavefunction::new(Profile::Gaussian { width: s, x0, p0 }, s, cfg.hbar)
            }
            StateSpec::Cat { a_over_sigma } => cat_state(a_over_sigma * s, s, cfg),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Vacuum => write!(f, "vacuum"),
            StateSpec::Fock { n } => write!(f, "fock:{n}"),
            StateSpec::Coherent { re, im } => write!(f, "coherent:{}", Complex64::new(*re, *im)),
            StateSpec::Cat { a_over_sigma } => write!(f, "cat:{a_over_sigma}"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    /// Parses `vacuum`, `fock:N`, `coherent:RE+IMi` or `cat:A` (separation in
    /// units of σ).
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = |what: &str| Error::InvalidParameter(format!("cannot parse state '{s}': {what}"));
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("vacuum", None) => Ok(StateSpec::Vacuum),
            ("fock", Some(a)) => a.parse().map(|n| StateSpec::Fock { n }).map_err(|_| bad("expected fock:N")),
            ("coherent", Some(a)) => {
                let z: Complex64 = a.parse().map_err(|_| bad("expected coherent:RE+IMi"))?;
                Ok(StateSpec::Coherent { re: z.re, im: z.im })
            }
            ("cat", Some(a)) => {
                let v: f64 = a.parse().map_err(|_| bad("expected cat:A"))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(bad("separation must be non-negative"));
                }
                Ok(StateSpec::Cat { a_over_sigma: v })
            }
            _ => Err(bad("unknown state name")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> PhysicsConfig {
        PhysicsConfig::default().with_cutoff(n).unwrap()
    }

    fn assert_valid(rho: &FockDensityMatrix, tol: f64) {
        let n = rho.dim();
        for m in 0..n {
            for k in 0..n {
                assert_eq!(rho.entry(m, k), rho.entry(k, m).conj());
            }
        }
        assert!((rho.trace() - 1.0).abs() < tol);
        assert!(rho.min_eigenvalue() > -tol);
    }

    #[test]
    fn fock_states_are_projectors() {
        let c = cfg(8);
        for n in 0..2 {
            let rho = fock_state(n, &c).unwrap();
            assert_valid(&rho, 1e-12);
            for m in 0..8 {
                for k in 0..8 {
                    let want = if m == n && k == n { 1.0 } else { 0.0 };
                    assert_eq!(rho.entry(m, k), Complex64::new(want, 0.0));
                }
            }
        }
    }

    #[test]
    fn fock_state_at_cutoff_is_rejected() {
        let c = cfg(8);
        match fock_state(8, &c) {
            Err(Error::IndexOutOfRange { index: 8, cutoff: 8 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(PhysicsConfig::new(0.0, 1.0, 8).is_err());
        assert!(PhysicsConfig::new(1.0, -1.0, 8).is_err());
        assert!(PhysicsConfig::new(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn zero_amplitude_is_vacuum() {
        let c = cfg(16);
        let rho = coherent_state(CoherentAmplitude::new(Complex64::new(0.0, 0.0), c.sigma), &c).unwrap();
        assert_eq!(rho, fock_state(0, &c).unwrap());
    }

    #[test]
    fn coherent_mean_number_is_poisson_mean() {
        let c = cfg(32);
        let rho = coherent_state(CoherentAmplitude::new(Complex64::new(1.0, 0.0), c.sigma), &c).unwrap();
        assert_valid(&rho, 1e-12);
        let nbar: f64 = rho.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((nbar - 1.0).abs() < 1e-10, "{nbar}");
    }

    #[test]
    fn coherent_truncation_reports_required_cutoff() {
        let c = cfg(4);
        let err = coherent_state(CoherentAmplitude::new(Complex64::new(2.0, 0.0), c.sigma), &c).unwrap_err();
        match err {
            Error::Truncation { tail, required, .. } => {
                // Poisson(4) weight at n >= 4
                let kept = (-4.0f64).exp() * (1.0 + 4.0 + 8.0 + 64.0 / 6.0);
                assert!((tail - (1.0 - kept)).abs() < 1e-12);
                assert!(required > 4);
                let ok = cfg(required);
                assert!(coherent_state(CoherentAmplitude::new(Complex64::new(2.0, 0.0), ok.sigma), &ok).is_ok());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cat_reduces_to_ground_state_at_zero_separation() {
        let c = cfg(8);
        let cat = cat_state(0.0, 0.8, &c).unwrap();
        let g = PositionWavefunction::ground(0.8, 1.0).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            assert!((cat.eval(x) - g.eval(x)).norm() < 1e-15);
        }
    }

    #[test]
    fn cat_is_normalized() {
        let c = cfg(8);
        let s = 0.9;
        let cat = cat_state(3.0 * s, s, &c).unwrap();
        assert!((cat.norm_sq() - 1.0).abs() < 1e-10);
        let far = cat_state(20.0 * s, s, &c).unwrap();
        assert!((far.norm_sq() - 1.0).abs() < 1e-10);
        let denom = (2.0 * (1.0 + (-200.0f64).exp())).sqrt();
        assert!((denom - std::f64::consts::SQRT_2).abs() < 1e-10);
        assert!(cat_state(1.0, 0.0, &c).is_err());
    }

    #[test]
    fn ground_wavefunction_projects_to_vacuum() {
        let c = cfg(24);
        let psi = PositionWavefunction::ground(c.sigma, c.hbar).unwrap();
        let rho = wavefunction_to_density(&psi, &c).unwrap();
        let vac = fock_state(0, &c).unwrap();
        let diff = (rho.entries() - vac.entries()).camax();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn cat_density_has_even_parity() {
        let c = cfg(48);
        let cat = cat_state(3.0 * c.sigma, c.sigma, &c).unwrap();
        let rho = wavefunction_to_density(&cat, &c).unwrap();
        assert_valid(&rho, 1e-10);
        for m in 0..48 {
            for k in 0..48 {
                if (m + k) % 2 == 1 {
                    assert!(rho.entry(m, k).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn wide_gaussian_populates_even_levels_like_squeezed_vacuum() {
        let c = cfg(48);
        let s = c.sigma;
        let psi = PositionWavefunction::new(Profile::Gaussian { width: 2.0 * s, x0: 0.0, p0: 0.0 }, s, c.hbar).unwrap();
        let rho = wavefunction_to_density(&psi, &c).unwrap();
        // squeezed vacuum with e^r = 2: |c_{2k}|² = (2k)!/(4^k k!²) tanh^{2k} r / cosh r
        let r = 2.0f64.ln();
        let t = r.tanh();
        let mut want = 1.0 / r.cosh();
        for k in 0..24 {
            let n = 2 * k;
            assert!((rho.entry(n, n).re - want).abs() < 1e-10, "n={n}");
            assert!(rho.entry(n + 1, n + 1).re.abs() < 1e-12);
            let kf = k as f64;
            want *= (2.0 * kf + 1.0) * (2.0 * kf + 2.0) / (4.0 * (kf + 1.0) * (kf + 1.0)) * t * t;
        }
    }

    #[test]
    fn narrow_basis_reports_truncation() {
        let c = cfg(4);
        let cat = cat_state(3.0 * c.sigma, c.sigma, &c).unwrap();
        match wavefunction_to_density(&cat, &c) {
            Err(Error::Truncation { required, .. }) => assert!(required > 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coherent_wavefunction_matches_number_basis() {
        let c = cfg(40);
        let spec = StateSpec::Coherent { re: 0.7, im: -0.4 };
        let from_psi = wavefunction_to_density(&spec.wavefunction(&c).unwrap(), &c).unwrap();
        let direct = spec.density(&c).unwrap();
        assert!((from_psi.entries() - direct.entries()).camax() < 1e-10);
    }

    #[test]
    fn density_document_round_trip() {
        let c = cfg(12);
        let rho = StateSpec::Coherent { re: 0.3, im: 0.2 }.density(&c).unwrap();
        let text = serde_json::to_string(&rho.to_document()).unwrap();
        let doc: DensityDocument = serde_json::from_str(&text).unwrap();
        let back = FockDensityMatrix::from_document(&doc, c.tol_trace).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn invalid_densities_are_rejected() {
        let mut m = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(FockDensityMatrix::from_entries(m.clone(), 1.0, 1.0, 1e-10).is_err());
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = Complex64::new(0.2, 0.1);
        assert!(FockDensityMatrix::from_entries(m.clone(), 1.0, 1.0, 1e-10).is_err());
        m[(1, 0)] = Complex64::new(0.2, -0.1);
        assert!(FockDensityMatrix::from_entries(m, 1.0, 1.0, 1e-10).is_ok());
    }

    #[test]
    fn state_names_parse() {
        assert_eq!("vacuum".parse::<StateSpec>().unwrap(), StateSpec::Vacuum);
        assert_eq!("fock:3".parse::<StateSpec>().unwrap(), StateSpec::Fock { n: 3 });
        assert_eq!("coherent:1+0i".parse::<StateSpec>().unwrap(), StateSpec::Coherent { re: 1.0, im: 0.0 });
        assert_eq!("cat:3".parse::<StateSpec>().unwrap(), StateSpec::Cat { a_over_sigma: 3.0 });
        assert!("dog:1".parse::<StateSpec>().is_err());
        assert!("fock:x".parse::<StateSpec>().is_err());
        let json = serde_json::to_string(&StateSpec::Fock { n: 2 }).unwrap();
        assert_eq!(json, r#"{"kind":"fock","params":{"n":2}}"#);
    }

    #[test]
    fn pure_vector_recovers_state() {
        let c = cfg(20);
        let rho = StateSpec::Coherent { re: 0.5, im: 0.5 }.density(&c).unwrap();
        let v = rho.pure_vector(1e-10).unwrap();
        let back = FockDensityMatrix::pure(v.as_slice(), c.hbar, c.sigma).unwrap();
        assert!((back.entries() - rho.entries()).camax() < 1e-12);
        let mixed = fock_state(0, &c).unwrap().mix(&fock_state(1, &c).unwrap(), 0.5).unwrap();
        assert!(mixed.pure_vector(1e-10).is_none());
    }
}

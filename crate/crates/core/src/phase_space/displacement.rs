//! Displacement operator `D̂(P,Q) = exp(i(P x̂ − Q p̂)/ħ)` in the number basis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{displacement_radial_into, ln_factorials};
use crate::states::{FockDensityMatrix, PhysicsConfig};

/// Ladder-form parameter `λ = (Q σ_p + i P σ_x)/ħ` so that
/// `D̂(P,Q) = exp(λ â† − λ* â)`.
pub fn ladder_parameter(p_param: f64, q_param: f64, sigma: f64, hbar: f64) -> Complex64 {
    let sigma_p = hbar / (2.0 * sigma);
    Complex64::new(q_param * sigma_p / hbar, p_param * sigma / hbar)
}

/// Exact matrix elements `⟨m|D(λ)|n⟩` for `m, n < dim`.
///
/// These are elements of the full operator, not of an exponential of a
/// truncated generator, so `Tr(D ρ)` is exact for any `ρ` supported on the
/// first `dim` levels.
pub fn displacement_elements(lambda: Complex64, dim: usize) -> DMatrix<Complex64> {
    let lnf = ln_factorials(dim + 1);
    let mut table = vec![0.0; dim * dim];
    let r = lambda.norm();
    displacement_radial_into(r, dim, &lnf, &mut table);
    let unit = if r > 0.0 { lambda / r } else { Complex64::new(1.0, 0.0) };
    let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    let mut phase = Complex64::new(1.0, 0.0);
    for d in 0..dim {
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..dim - d {
            let g = table[d * dim + n];
            out[(n + d, n)] = phase * g;
            if d > 0 {
                out[(n, n + d)] = phase.conj() * (sign * g);
            }
        }
        phase *= unit;
    }
    out
}

/// Truncated `N × N` block of `D̂(P,Q)` at the basis scale of `cfg`.
///
/// Fails when `|λ|² ≥ N`, where the block is far from unitary.
pub fn displacement_matrix(p_param: f64, q_param: f64, cfg: &PhysicsConfig) -> Result<DMatrix<Complex64>> {
    cfg.validate()?;
    if !(p_param.is_finite() && q_param.is_finite()) {
        return Err(Error::InvalidParameter("displacement parameters must be finite".into()));
    }
    let lambda = ladder_parameter(p_param, q_param, cfg.sigma, cfg.hbar);
    let l2 = lambda.norm_sqr();
    if l2 >= cfg.fock_cutoff as f64 {
        return Err(Error::Truncation {
            tail: l2,
            tol: cfg.fock_cutoff as f64,
            required: l2.ceil() as usize + 1,
        });
    }
    Ok(displacement_elements(lambda, cfg.fock_cutoff))
}

/// `D̂ ρ D̂†`, shifting the state by `Q` in position and `P` in momentum.
///
/// Weight pushed past the cutoff is measured; above `tol` this fails,
/// otherwise the result is renormalized.
pub fn displace_density(rho: &FockDensityMatrix, p_param: f64, q_param: f64, tol: f64) -> Result<FockDensityMatrix> {
    let lambda = ladder_parameter(p_param, q_param, rho.sigma(), rho.hbar());
    let d = displacement_elements(lambda, rho.dim());
    let shifted = &d * rho.entries() * d.adjoint();
    let tr: f64 = (0..rho.dim()).map(|n| shifted[(n, n)].re).sum();
    let leak = 1.0 - tr;
    if leak > tol {
        return Err(Error::Truncation { tail: leak, tol, required: rho.dim() + (4.0 * lambda.norm_sqr()).ceil() as usize + 8 });
    }
    Ok(FockDensityMatrix::from_raw(shifted / Complex64::new(tr, 0.0), rho.hbar(), rho.sigma()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `exp(iH)` for Hermitian `H` via its eigendecomposition.
    fn expi_hermitian(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let eig = h.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, e)));
        v * phases * v.adjoint()
    }

    /// Truncated `(P x̂ − Q p̂)/ħ` built from ladder matrices.
    fn generator(p: f64, q: f64, cfg: &PhysicsConfig) -> DMatrix<Complex64> {
        let n = cfg.fock_cutoff;
        let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for k in 1..n {
            a[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let x = (&a + &ad) * Complex64::new(cfg.sigma_x(), 0.0);
        let pm = (&ad - &a) * Complex64::new(0.0, cfg.sigma_p());
        (x * Complex64::new(p, 0.0) - pm * Complex64::new(q, 0.0)) / Complex64::new(cfg.hbar, 0.0)
    }

    fn cfg(n: usize) -> PhysicsConfig {
        PhysicsConfig::new(1.0, 0.8, n).unwrap()
    }

    #[test]
    fn zero_displacement_is_identity() {
        let c = cfg(12);
        let d = displacement_matrix(0.0, 0.0, &c).unwrap();
        assert_eq!(d, DMatrix::identity(12, 12));
    }

    #[test]
    fn vacuum_element_matches_matrix_exponential() {
        let c = cfg(64);
        for &(p, q) in &[(0.4, 0.0), (0.0, 0.7), (-0.5, 0.9), (1.1, -0.3)] {
            let lam = ladder_parameter(p, q, c.sigma, c.hbar);
            let closed = (-(p * p * c.sigma_x().powi(2) + q * q * c.sigma_p().powi(2)) / (2.0 * c.hbar * c.hbar)).exp();
            assert!((closed - (-lam.norm_sqr() / 2.0).exp()).abs() < 1e-15);
            let d = displacement_matrix(p, q, &c).unwrap();
            assert!((d[(0, 0)] - closed).norm() < 1e-12);
            let oracle = expi_hermitian(&generator(p, q, &c));
            // low block is unaffected by truncation of the generator
            for m in 0..16 {
                for n in 0..16 {
                    assert!((d[(m, n)] - oracle[(m, n)]).norm() < 1e-8, "({m},{n})");
                }
            }
        }
    }

    #[test]
    fn displacement_is_unitary_on_low_block() {
        let c = cfg(64);
        // |λ| = 1
        let p = 0.6 * c.hbar / c.sigma_x();
        let q = 0.8 * c.hbar / c.sigma_p();
        let lam = ladder_parameter(p, q, c.sigma, c.hbar);
        assert!((lam.norm() - 1.0).abs() < 1e-14);
        let d = displacement_matrix(p, q, &c).unwrap();
        let dd = d.adjoint() * &d;
        for m in 0..32 {
            for n in 0..32 {
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((dd[(m, n)] - want).norm() < 1e-8, "({m},{n}) {}", dd[(m, n)]);
            }
        }
    }

    #[test]
    fn large_displacement_is_rejected() {
        let c = cfg(8);
        let p = 3.0 * c.hbar / c.sigma_x();
        assert!(matches!(displacement_matrix(p, 0.0, &c), Err(Error::Truncation { .. })));
    }

    #[test]
    fn displaced_vacuum_is_coherent_state() {
        let c = cfg(40);
        let rho = crate::states::fock_state(0, &c).unwrap();
        let (p, q) = (0.3, -0.9);
        let moved = displace_density(&rho, p, q, 1e-12).unwrap();
        let alpha = ladder_parameter(p, q, c.sigma, c.hbar);
        let coh = crate::states::coherent_state(crate::states::CoherentAmplitude::new(alpha, c.sigma), &c).unwrap();
        assert!((moved.entries() - coh.entries()).camax() < 1e-12);
        let (x0, p0) = crate::states::CoherentAmplitude::new(alpha, c.sigma).center(c.hbar);
        assert!((x0 - q).abs() < 1e-14 && (p0 - p).abs() < 1e-14);
    }
}

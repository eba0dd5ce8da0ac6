//! Recurrences for oscillator eigenfunctions and displaced-number-state
//! matrix elements. Everything here is evaluated through normalized
//! three-term recurrences so no factorials are ever formed explicitly.

use std::f64::consts::PI;

/// `ln(n!)` for `n = 0..len`.
pub fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for n in 0..len {
        if n > 1 {
            acc += (n as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Oscillator eigenfunctions `φ_0..φ_{len-1}` at `x` for position scale
/// `sigma` (the ground state is `(2πσ²)^{-1/4} exp(-x²/4σ²)`), written
/// into `out`.
pub fn hermite_functions_into(x: f64, sigma: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let xi = x / (std::f64::consts::SQRT_2 * sigma);
    out[0] = (2.0 * PI * sigma * sigma).powf(-0.25) * (-0.5 * xi * xi).exp();
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * xi * out[0];
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * xi * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

pub fn hermite_functions(x: f64, sigma: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    hermite_functions_into(x, sigma, &mut out);
    out
}

/// Single oscillator eigenfunction `φ_n(x)` at scale `sigma`.
pub fn hermite_function(n: usize, x: f64, sigma: f64) -> f64 {
    hermite_functions(x, sigma, n + 1)[n]
}

/// Laguerre polynomial `L_n(x)`.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Radial part of the displacement matrix elements.
///
/// For `|λ| = r` and `d ≥ 0` the element `⟨n+d|D(λ)|n⟩` equals
/// `e^{idθ} g[d][n]` with
/// `g[d][n] = sqrt(n!/(n+d)!) r^d e^{-r²/2} L_n^{(d)}(r²)`.
/// Only entries with `n + d < dim` are filled; `table` is laid out as
/// `table[d * dim + n]`.
pub fn displacement_radial_into(r: f64, dim: usize, lnfact: &[f64], table: &mut [f64]) {
    debug_assert!(table.len() >= dim * dim);
    let x = r * r;
    let ln_r = r.ln();
    for d in 0..dim {
        let row = &mut table[d * dim..(d + 1) * dim];
        let len = dim - d;
        let g0 = if d == 0 {
            (-0.5 * x).exp()
        } else if r == 0.0 {
            0.0
        } else {
            (d as f64 * ln_r - 0.5 * x - 0.5 * lnfact[d]).exp()
        };
        row[0] = g0;
        if len > 1 {
            let df = d as f64;
            row[1] = (1.0 + df - x) * g0 / (1.0 + df).sqrt();
            for n in 1..len - 1 {
                let nf = n as f64;
                row[n + 1] = ((2.0 * nf + 1.0 + df - x) * row[n] - (nf * (nf + df)).sqrt() * row[n - 1])
                    / ((nf + 1.0) * (nf + 1.0 + df)).sqrt();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn assoc_laguerre(n: usize, alpha: f64, x: f64) -> f64 {
        // explicit sum
        (0..=n)
            .map(|i| {
                let binom = (0..n - i).fold(1.0, |acc, j| acc * (n as f64 + alpha - j as f64))
                    / factorial(n - i);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom * x.powi(i as i32) / factorial(i)
            })
            .sum()
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let sigma = 0.7;
        let n = 30;
        let h = sigma / 20.0;
        let mut gram = vec![0.0; n * n];
        let mut k = -2000i32;
        while k <= 2000 {
            let phi = hermite_functions(k as f64 * h, sigma, n);
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += phi[a] * phi[b] * h;
                }
            }
            k += 1;
        }
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * n + b] - want).abs() < 1e-12, "({a},{b}) {}", gram[a * n + b]);
            }
        }
    }

    #[test]
    fn first_hermite_functions_match_closed_form() {
        let sigma = 1.3;
        for &x in &[-2.0, -0.3, 0.0, 0.9, 3.1] {
            let phi0 = (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp();
            let phi = hermite_functions(x, sigma, 3);
            assert!((phi[0] - phi0).abs() < 1e-15);
            assert!((phi[1] - x / sigma * phi0).abs() < 1e-15);
            let want2 = (x * x / (sigma * sigma) - 1.0) / std::f64::consts::SQRT_2 * phi0;
            assert!((phi[2] - want2).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_table_matches_explicit_formula() {
        let dim = 10;
        let lnf = ln_factorials(dim + 1);
        let mut table = vec![0.0; dim * dim];
        for &r in &[0.0, 0.3, 1.0, 2.5] {
            displacement_radial_into(r, dim, &lnf, &mut table);
            for d in 0..dim {
                for n in 0..dim - d {
                    let want = (factorial(n) / factorial(n + d)).sqrt()
                        * r.powi(d as i32)
                        * (-0.5 * r * r).exp()
                        * assoc_laguerre(n, d as f64, r * r);
                    let got = table[d * dim + n];
                    assert!((got - want).abs() < 1e-12, "r={r} d={d} n={n}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        for &x in &[0.0, 0.5, 2.0, 7.0] {
            assert_eq!(laguerre(0, x), 1.0);
            assert!((laguerre(1, x) - (1.0 - x)).abs() < 1e-15);
            assert!((laguerre(2, x) - (x * x - 4.0 * x + 2.0) / 2.0).abs() < 1e-13);
        }
    }
}

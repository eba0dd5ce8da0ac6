//! Weyl functions, Wigner functions by two independent routes, cross-Wigner
//! functions, marginals and classical-like averages.

mod direct;
mod displacement;
mod weyl;

pub use direct::{cross_wigner, wigner_direct, wigner_fock_analytic};
pub use displacement::{displace_density, displacement_elements, displacement_matrix, ladder_parameter};
pub(crate) use weyl::{AxisPlan, MAX_LATTICE_POINTS};
pub use weyl::{weyl_function, wigner_from_weyl, WeylPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, PhaseFunction, Rule, ScalarField};

/// Marginals may dip below zero by this much through discretization.
const MARGINAL_NEGATIVITY_TOL: f64 = 1e-8;

/// One-dimensional density sampled at `coords`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub density: Vec<f64>,
}

impl Marginal {
    /// Trapezoid integral of the density.
    pub fn mass(&self) -> f64 {
        let n = self.coords.len();
        if n < 2 {
            return 0.0;
        }
        let h = self.coords[1] - self.coords[0];
        crate::grid::trapezoid_weights(n, h).iter().zip(&self.density).map(|(w, d)| w * d).sum()
    }
}

fn check_marginal(field: &ScalarField, coords: Vec<f64>, density: Vec<f64>, axis: &str) -> Result<Marginal> {
    if field.kind() != FieldKind::Wigner {
        return Err(Error::InvalidParameter(format!("marginals are defined for Wigner fields, got {:?}", field.kind())));
    }
    let min = density.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -MARGINAL_NEGATIVITY_TOL {
        return Err(Error::Inconsistent(format!("{axis} marginal reaches {min:e}; the field is not a valid Wigner function")));
    }
    Ok(Marginal { coords, density })
}

/// Position density `∫ W(x,p) dp`.
pub fn marginal_x(field: &ScalarField) -> Result<Marginal> {
    let g = field.grid();
    let wp = g.p_weights();
    let density = field.values().rows().into_iter().map(|row| row.iter().zip(&wp).map(|(v, w)| v * w).sum()).collect();
    check_marginal(field, g.xs(), density, "position")
}

/// Momentum density `∫ W(x,p) dx`.
pub fn marginal_p(field: &ScalarField) -> Result<Marginal> {
    let g = field.grid();
    let wx = g.x_weights();
    let density = field.values().columns().into_iter().map(|col| col.iter().zip(&wx).map(|(v, w)| v * w).sum()).collect();
    check_marginal(field, g.ps(), density, "momentum")
}

/// A quadrature result and an estimate of its discretization error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err_bound: f64,
}

/// Classical-like average `∬ f(x,p) W(x,p) dx dp`.
///
/// The error bound combines the spread between the fourth- and second-order
/// rules with the weight carried by the outermost ring of grid nodes, which
/// stands in for whatever lies beyond the window.
pub fn expectation<F: PhaseFunction + ?Sized>(field: &ScalarField, f: &F) -> Estimate {
    let g = field.grid();
    let values = field.values();
    let cubic = f.weights(g, Rule::Cubic);
    let linear = f.weights(g, Rule::Linear);
    let value: f64 = cubic.iter().zip(values.iter()).map(|(w, v)| w * v).sum();
    let coarse: f64 = linear.iter().zip(values.iter()).map(|(w, v)| w * v).sum();
    let mut ring = 0.0;
    for ((i, j), w) in cubic.indexed_iter() {
        if i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.np {
            ring += (w * values[(i, j)]).abs();
        }
    }
    Estimate { value, err_bound: (value - coarse).abs() + ring }
}

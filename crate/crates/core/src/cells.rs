//! Probability on rectangular phase-space cells whose area is bounded below
//! by `ħ/2`, guarded refinement of cell partitions, and Weyl quantization of
//! phase-space functions such as cell indicators.
//!
//! `P_k = ∬_{U_k} W dx dp` is a probability only in the sense that it is
//! additive and sums to one over a covering partition; nothing forces it to
//! be non-negative, so negative values are reported rather than rejected.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interval_weights, PhaseFunction, PhaseGrid, Rule, ScalarField, Window};
use crate::phase_space::{expectation, ladder_parameter, AxisPlan, MAX_LATTICE_POINTS};
use crate::special::{displacement_radial_into, ln_factorials};
use crate::states::PhysicsConfig;

/// Slack allowed on the `ħ/2` lower bound and on area bookkeeping.
const MEASURE_TOL: f64 = 1e-12;
/// Largest probability mass a partition may leave outside its coverage.
pub const COVERAGE_TOL: f64 = 1e-6;

/// Closed rectangle `[x_lo, x_hi] × [p_lo, p_hi]` with a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub x_lo: f64,
    pub x_hi: f64,
    pub p_lo: f64,
    pub p_hi: f64,
}

impl Cell {
    /// Checks ordering of the edges and the `ħ/2` lower bound (inclusive).
    pub fn new(id: impl Into<String>, x_lo: f64, x_hi: f64, p_lo: f64, p_hi: f64, hbar: f64) -> Result<Self> {
        let cell = Cell { id: id.into(), x_lo, x_hi, p_lo, p_hi };
        cell.validate(hbar)?;
        Ok(cell)
    }

    pub fn validate(&self, hbar: f64) -> Result<()> {
        let finite = [self.x_lo, self.x_hi, self.p_lo, self.p_hi].iter().all(|v| v.is_finite());
        if !finite || !(self.x_hi > self.x_lo && self.p_hi > self.p_lo) {
            return Err(Error::InvalidParameter(format!("cell {} has empty or non-finite extent", self.id)));
        }
        let bound = 0.5 * hbar;
        if self.measure() < bound - MEASURE_TOL {
            return Err(Error::SubQuantumCell { measure: self.measure(), bound });
        }
        Ok(())
    }

    pub fn measure(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.p_hi - self.p_lo)
    }

    pub fn window(&self) -> Window {
        Window { x_lo: self.x_lo, x_hi: self.x_hi, p_lo: self.p_lo, p_hi: self.p_hi }
    }
}

/// Finite set of interior-disjoint cells tiling a coverage window.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    cells: Vec<Cell>,
    coverage: Window,
    hbar: f64,
}

/// JSON form `{coverage, cells: [{id, x_lo, x_hi, p_lo, p_hi}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub coverage: Window,
    pub cells: Vec<Cell>,
}

fn overlap(a: &Window, b: &Window) -> f64 {
    let dx = a.x_hi.min(b.x_hi) - a.x_lo.max(b.x_lo);
    let dp = a.p_hi.min(b.p_hi) - a.p_lo.max(b.p_lo);
    if dx > 0.0 && dp > 0.0 {
        dx * dp
    } else {
        0.0
    }
}

impl CellPartition {
    /// Validates every cell, unique ids, containment in `coverage`, pairwise
    /// interior disjointness and that the cell areas add up to the coverage
    /// area (so there are no gaps).
    pub fn new(cells: Vec<Cell>, coverage: Window, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if !(coverage.x_hi > coverage.x_lo && coverage.p_hi > coverage.p_lo) {
            return Err(Error::InvalidParameter("coverage window is empty".into()));
        }
        if cells.is_empty() {
            return Err(Error::InvalidParameter("a partition needs at least one cell".into()));
        }
        let area = coverage.area();
        let tol = MEASURE_TOL.max(1e-12 * area);
        let edge_tol = 1e-12 * (coverage.x_hi - coverage.x_lo).max(coverage.p_hi - coverage.p_lo);
        let mut ids = std::collections::HashSet::new();
        for c in &cells {
            c.validate(hbar)?;
            if !ids.insert(c.id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate cell id {}", c.id)));
            }
            if !coverage.contains(&c.window(), edge_tol) {
                return Err(Error::InvalidParameter(format!("cell {} extends past the coverage window", c.id)));
            }
        }
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                let o = overlap(&a.window(), &b.window());
                if o > tol {
                    return Err(Error::InvalidParameter(format!("cells {} and {} overlap by {o:e}", a.id, b.id)));
                }
            }
        }
        let total: f64 = cells.iter().map(Cell::measure).sum();
        if (total - area).abs() > 1e-9 * area {
            return Err(Error::InvalidParameter(format!("cells cover {total} of a coverage window of area {area}")));
        }
        Ok(CellPartition { cells, coverage, hbar })
    }

    /// `nx × np` congruent cells tiling `coverage`, labelled `x{i}p{j}`.
    pub fn uniform(coverage: Window, nx: usize, np: usize, hbar: f64) -> Result<Self> {
        if nx == 0 || np == 0 {
            return Err(Error::InvalidParameter("tiling needs at least one cell per axis".into()));
        }
        let wx = (coverage.x_hi - coverage.x_lo) / nx as f64;
        let wp = (coverage.p_hi - coverage.p_lo) / np as f64;
        let edge = |lo: f64, hi: f64, w: f64, n: usize, k: usize| if k == n { hi } else { lo + k as f64 * w };
        let mut cells = Vec::with_capacity(nx * np);
        for i in 0..nx {
            for j in 0..np {
                cells.push(Cell::new(
                    format!("x{i}p{j}"),
                    edge(coverage.x_lo, coverage.x_hi, wx, nx, i),
                    edge(coverage.x_lo, coverage.x_hi, wx, nx, i + 1),
                    edge(coverage.p_lo, coverage.p_hi, wp, np, j),
                    edge(coverage.p_lo, coverage.p_hi, wp, np, j + 1),
                    hbar,
                )?);
            }
        }
        Self::new(cells, coverage, hbar)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn coverage(&self) -> Window {
        self.coverage
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn to_document(&self) -> PartitionDocument {
        PartitionDocument { coverage: self.coverage, cells: self.cells.clone() }
    }

    pub fn from_document(doc: PartitionDocument, hbar: f64) -> Result<Self> {
        Self::new(doc.cells, doc.coverage, hbar)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str, hbar: f64) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?, hbar)
    }
}

/// Direction along which a cell is halved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    P,
}

/// Splits `cell_id` in half along `axis` into `{id}.0` (lower half) and
/// `{id}.1`, refusing when the halves would fall below `ħ/2`.
pub fn refine_partition(part: &CellPartition, cell_id: &str, axis: Axis) -> Result<CellPartition> {
    let pos = part
        .cells
        .iter()
        .position(|c| c.id == cell_id)
        .ok_or_else(|| Error::InvalidParameter(format!("no cell with id {cell_id}")))?;
    let parent = &part.cells[pos];
    let bound = 0.5 * part.hbar;
    let half = 0.5 * parent.measure();
    if half < bound - MEASURE_TOL {
        return Err(Error::SubQuantumCell { measure: half, bound });
    }
    let (lo, hi) = match axis {
        Axis::X => {
            let mid = 0.5 * (parent.x_lo + parent.x_hi);
            (Cell { x_hi: mid, ..parent.clone() }, Cell { x_lo: mid, ..parent.clone() })
        }
        Axis::P => {
            let mid = 0.5 * (parent.p_lo + parent.p_hi);
            (Cell { p_hi: mid, ..parent.clone() }, Cell { p_lo: mid, ..parent.clone() })
        }
    };
    let mut cells = part.cells.clone();
    cells.splice(pos..=pos, [Cell { id: format!("{cell_id}.0"), ..lo }, Cell { id: format!("{cell_id}.1"), ..hi }]);
    CellPartition::new(cells, part.coverage, part.hbar)
}

/// Unit-height indicator of the closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicator1D {
    pub lo: f64,
    pub hi: f64,
}

impl Indicator1D {
    pub fn eval(&self, v: f64) -> f64 {
        if v >= self.lo && v <= self.hi {
            1.0
        } else {
            0.0
        }
    }
}

/// Indicator `X(x)Π(p)` of a cell. As a [`PhaseFunction`] it integrates the
/// interpolant of the field over the rectangle exactly, so edges that fall
/// between grid nodes are handled without staircase error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellIndicator {
    pub x: Indicator1D,
    pub p: Indicator1D,
}

impl CellIndicator {
    pub fn eval(&self, x: f64, p: f64) -> f64 {
        self.x.eval(x) * self.p.eval(p)
    }
}

impl PhaseFunction for CellIndicator {
    fn weights(&self, grid: &PhaseGrid, rule: Rule) -> Array2<f64> {
        let wx = interval_weights(grid.x_min, grid.dx(), grid.nx, self.x.lo, self.x.hi, rule);
        let wp = interval_weights(grid.p_min, grid.dp(), grid.np, self.p.lo, self.p.hi, rule);
        Array2::from_shape_fn((grid.nx, grid.np), |(i, j)| wx[i] * wp[j])
    }
}

/// Position and momentum indicators `(X, Π)` of a cell.
pub fn indicator_functions(c: &Cell) -> (Indicator1D, Indicator1D) {
    (Indicator1D { lo: c.x_lo, hi: c.x_hi }, Indicator1D { lo: c.p_lo, hi: c.p_hi })
}

pub fn cell_indicator(c: &Cell) -> CellIndicator {
    let (x, p) = indicator_functions(c);
    CellIndicator { x, p }
}

/// `P_k` for one cell with its quadrature error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProbability {
    pub id: String,
    pub value: f64,
    pub err_bound: f64,
    /// `value < −err_bound`
    pub negative: bool,
}

fn check_inside(field: &ScalarField, c: &Cell) -> Result<()> {
    let g = field.grid();
    let tol = 1e-12 * (g.x_max - g.x_min).max(g.p_max - g.p_min);
    if !g.window().contains(&c.window(), tol) {
        return Err(Error::Coverage(format!("cell {} extends past the field's grid", c.id)));
    }
    Ok(())
}

fn integrate_cell(field: &ScalarField, c: &Cell) -> CellProbability {
    let ind = cell_indicator(c);
    let g = field.grid();
    let fine = expectation(field, &ind).value;
    let coarse: f64 = ind.weights(g, Rule::Linear).iter().zip(field.values().iter()).map(|(w, v)| w * v).sum();
    // rounding of the weighted sum
    let floor = 1e-14 * fine.abs().max(1e-2);
    let err_bound = (fine - coarse).abs() + floor;
    CellProbability { id: c.id.clone(), value: fine, err_bound, negative: fine < -err_bound }
}

/// `P = ∬_cell W dx dp`; the cell must lie inside the field's grid.
pub fn cell_probability(field: &ScalarField, c: &Cell) -> Result<CellProbability> {
    check_inside(field, c)?;
    Ok(integrate_cell(field, c))
}

/// Cell probabilities over a whole partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub cells: Vec<CellProbability>,
    pub total: f64,
    /// Field mass on the grid outside the partition's coverage.
    pub tail: f64,
    pub min_value: f64,
}

impl PartitionReport {
    /// CSV with columns `id,P,err_bound,negative_flag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "id,P,err_bound,negative_flag")?;
        for c in &self.cells {
            writeln!(out, "{},{:e},{:e},{}", c.id, c.value, c.err_bound, c.negative)?;
        }
        Ok(())
    }
}

/// Probabilities of every cell. Fails if more than `1e-6` of the field's
/// mass lies outside the coverage window.
pub fn partition_probabilities(field: &ScalarField, part: &CellPartition) -> Result<PartitionReport> {
    for c in part.cells() {
        check_inside(field, c)?;
    }
    let cells: Vec<CellProbability> = part.cells().par_iter().map(|c| integrate_cell(field, c)).collect();
    let total: f64 = cells.iter().map(|c| c.value).sum();
    let g = field.grid();
    let whole = Cell { id: "grid".into(), x_lo: g.x_min, x_hi: g.x_max, p_lo: g.p_min, p_hi: g.p_max };
    let tail = integrate_cell(field, &whole).value - total;
    if tail.abs() > COVERAGE_TOL {
        return Err(Error::Coverage(format!("partition misses probability mass {tail:e} outside its coverage")));
    }
    let min_value = cells.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    Ok(PartitionReport { cells, total, tail, min_value })
}

/// Weyl quantization `A_mn = ∬ f(x,p) W_{|n⟩⟨m|}(x,p) dx dp`, so that
/// `Tr(Â ρ̂) = ∬ f W_ρ dx dp` for every `ρ̂` on the first `N` levels.
///
/// The phase-space integral is the grid quadrature defined by
/// [`PhaseFunction::weights`]; it is carried to the number basis through the
/// Fourier transform of the weights and exact displacement matrix elements,
/// `A_mn = (2πħ)^{-2} ∬ ⟨m|D̂(P,Q)|n⟩ F(P,Q) dP dQ` with
/// `F(P,Q) = Σ_ij w_ij e^{−i(P x_i − Q p_j)/ħ}`. The result therefore equals
/// the grid quadrature of `f W_ρ` to rounding, whatever the state.
#[derive(Debug, Clone)]
pub struct WeylQuantizer {
    cfg: PhysicsConfig,
    grid: PhaseGrid,
}

/// Radius beyond which every `|⟨m|D(λ)|n⟩|`, `m, n < dim`, is below `1e-16`.
fn displacement_cutoff(dim: usize) -> f64 {
    let lnf = ln_factorials(dim + 1);
    let mut table = vec![0.0; dim * dim];
    let mut r = ((4 * dim + 2) as f64).sqrt();
    loop {
        displacement_radial_into(r, dim, &lnf, &mut table);
        let worst = (0..dim).flat_map(|d| (0..dim - d).map(move |n| (d, n))).map(|(d, n)| table[d * dim + n].abs()).fold(0.0, f64::max);
        if worst < 1e-16 {
            return r + 0.1;
        }
        r += 0.05;
    }
}

impl WeylQuantizer {
    /// Quantizer on a grid spanning `±(√(4N+2)+10)` vacuum widths, fine
    /// enough to resolve the cross-Wigner functions of all `N` levels.
    pub fn new(cfg: &PhysicsConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fock_cutoff;
        let reach = ((4 * n + 2) as f64).sqrt();
        let ext = reach + 10.0;
        let nodes = ((2.0 * ext / (0.5 / reach)).ceil() as usize + 1).min(2049) | 1;
        let grid = PhaseGrid::symmetric(ext * cfg.sigma_x(), ext * cfg.sigma_p(), nodes, nodes, cfg.hbar)?;
        Self::with_grid(cfg, grid)
    }

    pub fn with_grid(cfg: &PhysicsConfig, grid: PhaseGrid) -> Result<Self> {
        cfg.validate()?;
        grid.validate()?;
        if (grid.hbar - cfg.hbar).abs() > 1e-15 * cfg.hbar {
            return Err(Error::InvalidParameter("grid and config disagree on hbar".into()));
        }
        Ok(WeylQuantizer { cfg: *cfg, grid })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn quantize<F: PhaseFunction + ?Sized>(&self, f: &F) -> Result<DMatrix<Complex64>> {
        Ok(self.quantize_weights(vec![f.weights(&self.grid, Rule::Cubic)])?.remove(0))
    }

    /// Several functions at once, sharing the displacement matrix elements.
    pub fn quantize_many(&self, fs: &[&dyn PhaseFunction]) -> Result<Vec<DMatrix<Complex64>>> {
        self.quantize_weights(fs.iter().map(|f| f.weights(&self.grid, Rule::Cubic)).collect())
    }

    fn quantize_weights(&self, weights: Vec<Array2<f64>>) -> Result<Vec<DMatrix<Complex64>>> {
        let g = &self.grid;
        let (hbar, sigma) = (self.cfg.hbar, self.cfg.sigma);
        let (sx, sp) = (self.cfg.sigma_x(), self.cfg.sigma_p());
        let dim = self.cfg.fock_cutoff;
        let r_cut = displacement_cutoff(dim);
        let reach = ((4 * dim + 2) as f64).sqrt() + 9.0;
        let px = AxisPlan::new(g.dx(), g.nx, g.x_min, g.x_max, r_cut * hbar / sx, reach * sx, hbar);
        let pp = AxisPlan::new(g.dp(), g.np, g.p_min, g.p_max, r_cut * hbar / sp, reach * sp, hbar);
        if px.len * pp.len > MAX_LATTICE_POINTS {
            return Err(Error::Inconsistent(format!("Fourier lattice {}x{} too large for this grid", px.len, pp.len)));
        }
        // lattice rows/columns that can reach |λ| ≤ r_cut
        let ks: Vec<usize> = (0..px.len).filter(|&k| (px.conj(k) * sx / hbar).abs() <= r_cut).collect();
        let ls: Vec<usize> = (0..pp.len).filter(|&l| (pp.conj(l) * sp / hbar).abs() <= r_cut).collect();

        let mut planner = FftPlanner::<f64>::new();
        let inv = planner.plan_fft_inverse(pp.len);
        let fwd = planner.plan_fft_forward(px.len);
        // F[f][ki * ls.len() + li] for the retained lattice points
        let transforms: Vec<Vec<Complex64>> = weights
            .iter()
            .map(|w| {
                // Q-axis: a[ri, rj] = w_ij (−1)^{ri+rj}, inverse FFT along p
                let rows: Vec<Vec<Complex64>> = (0..g.nx)
                    .into_par_iter()
                    .map(|i| {
                        let ri = px.refine * i;
                        let mut buf = vec![Complex64::new(0.0, 0.0); pp.len];
                        for j in 0..g.np {
                            let rj = pp.refine * j;
                            let sign = if (ri + rj).is_multiple_of(2) { 1.0 } else { -1.0 };
                            buf[rj] = Complex64::new(sign * w[(i, j)], 0.0);
                        }
                        inv.process(&mut buf);
                        ls.iter().map(|&l| buf[l]).collect()
                    })
                    .collect();
                // P-axis: forward FFT along x for every retained column
                let cols: Vec<Vec<Complex64>> = (0..ls.len())
                    .into_par_iter()
                    .map(|li| {
                        let mut buf = vec![Complex64::new(0.0, 0.0); px.len];
                        for (i, row) in rows.iter().enumerate() {
                            buf[px.refine * i] = row[li];
                        }
                        fwd.process(&mut buf);
                        ks.iter().map(|&k| buf[k]).collect()
                    })
                    .collect();
                let mut out = vec![Complex64::new(0.0, 0.0); ks.len() * ls.len()];
                for (ki, &k) in ks.iter().enumerate() {
                    let row_phase = Complex64::from_polar(1.0, -px.conj(k) * g.x_min / hbar);
                    for (li, &l) in ls.iter().enumerate() {
                        let col_phase = Complex64::from_polar(1.0, pp.conj(l) * g.p_min / hbar);
                        out[ki * ls.len() + li] = cols[li][ki] * row_phase * col_phase;
                    }
                }
                out
            })
            .collect();

        let nf = weights.len();
        let lnf = ln_factorials(dim + 1);
        // acc[f][d * dim + n] accumulates Σ F e^{idθ} g_d,n (lower part, m = n + d)
        // and upper[f][...] Σ F (−1)^d e^{−idθ} g_d,n (m = n, column n + d)
        let zero = || (vec![vec![Complex64::new(0.0, 0.0); dim * dim]; nf], vec![vec![Complex64::new(0.0, 0.0); dim * dim]; nf]);
        let (lower, upper) = (0..ks.len())
            .into_par_iter()
            .fold(zero, |(mut lower, mut upper), ki| {
                let mut table = vec![0.0; dim * dim];
                let p_param = px.conj(ks[ki]);
                for (li, &l) in ls.iter().enumerate() {
                    let lambda = ladder_parameter(p_param, pp.conj(l), sigma, hbar);
                    let r = lambda.norm();
                    if r > r_cut {
                        continue;
                    }
                    displacement_radial_into(r, dim, &lnf, &mut table);
                    let unit = if r > 0.0 { lambda / r } else { Complex64::new(1.0, 0.0) };
                    for f in 0..nf {
                        let fv = transforms[f][ki * ls.len() + li];
                        let mut phase = fv;
                        let mut phase_c = fv;
                        for d in 0..dim {
                            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                            let base = d * dim;
                            for n in 0..dim - d {
                                let gv = table[base + n];
                                lower[f][base + n] += phase * gv;
                                if d > 0 {
                                    upper[f][base + n] += phase_c * (sign * gv);
                                }
                            }
                            phase *= unit;
                            phase_c *= unit.conj();
                        }
                    }
                }
                (lower, upper)
            })
            .reduce(zero, |(mut la, mut ua), (lb, ub)| {
                for f in 0..nf {
                    for (a, b) in la[f].iter_mut().zip(&lb[f]) {
                        *a += b;
                    }
                    for (a, b) in ua[f].iter_mut().zip(&ub[f]) {
                        *a += b;
                    }
                }
                (la, ua)
            });

        let scale = px.step * pp.step / (2.0 * PI * hbar).powi(2);
        Ok((0..nf)
            .map(|f| {
                let mut a = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
                for d in 0..dim {
                    for n in 0..dim - d {
                        a[(n + d, n)] = lower[f][d * dim + n] * scale;
                        if d > 0 {
                            a[(n, n + d)] = upper[f][d * dim + n] * scale;
                        }
                    }
                }
                a
            })
            .collect())
    }
}

/// Weyl quantization of `f` on the default quantizer grid for `cfg`.
pub fn weyl_quantize<F: PhaseFunction + ?Sized>(f: &F, cfg: &PhysicsConfig) -> Result<DMatrix<Complex64>> {
    WeylQuantizer::new(cfg)?.quantize(f)
}

/// Extreme eigenvalues of a quantized real function and how far they stray
/// outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBounds {
    pub min: f64,
    pub max: f64,
    /// `max(0, −min, max − 1)`
    pub excess: f64,
}

/// Spectrum of the Hermitian part of `a`.
pub fn spectrum_bounds(a: &DMatrix<Complex64>) -> SpectrumBounds {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen().eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SpectrumBounds { min, max, excess: 0.0f64.max(-min).max(max - 1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{wigner_fock_analytic, wigner_from_weyl};
    use crate::states::{fock_state, StateSpec};

    fn cfg(n: usize) -> PhysicsConfig {
        PhysicsConfig::default().with_cutoff(n).unwrap()
    }

    fn field(n: usize) -> ScalarField {
        let c = cfg(8);
        let g = PhaseGrid::symmetric(8.0 * c.sigma_x(), 8.0 * c.sigma_p(), 161, 161, c.hbar).unwrap();
        wigner_fock_analytic(n, &g, c.sigma).unwrap()
    }

    #[test]
    fn cells_respect_quantum_bound() {
        assert!(Cell::new("a", 0.0, 1.0, 0.0, 0.5, 1.0).is_ok());
        assert!(matches!(Cell::new("b", 0.0, 1.0, 0.0, 0.4, 1.0), Err(Error::SubQuantumCell { .. })));
        assert!(Cell::new("c", 1.0, 0.0, 0.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn refinement_halves_and_guards() {
        let cov = Window { x_lo: 0.0, x_hi: 2.0, p_lo: 0.0, p_hi: 1.0 };
        let part = CellPartition::uniform(cov, 1, 1, 1.0).unwrap();
        let fine = refine_partition(&part, "x0p0", Axis::X).unwrap();
        let ids: Vec<&str> = fine.cells().iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["x0p0.0", "x0p0.1"]);
        assert!(fine.cells().iter().all(|c| (c.measure() - 1.0).abs() < 1e-15));
        let finer = refine_partition(&fine, "x0p0.1", Axis::P).unwrap();
        assert!(finer.cells().iter().skip(1).all(|c| (c.measure() - 0.5).abs() < 1e-15));
        assert!(matches!(refine_partition(&finer, "x0p0.1.0", Axis::X), Err(Error::SubQuantumCell { .. })));

        let small = CellPartition::uniform(Window { x_lo: 0.0, x_hi: 0.9, p_lo: 0.0, p_hi: 1.0 }, 1, 1, 1.0).unwrap();
        assert!(refine_partition(&small, "x0p0", Axis::P).is_err());
        assert!(refine_partition(&part, "missing", Axis::P).is_err());
    }

    #[test]
    fn partitions_reject_overlaps_and_gaps() {
        let cov = Window { x_lo: 0.0, x_hi: 2.0, p_lo: 0.0, p_hi: 1.0 };
        let a = Cell::new("a", 0.0, 1.2, 0.0, 1.0, 1.0).unwrap();
        let b = Cell::new("b", 1.0, 2.0, 0.0, 1.0, 1.0).unwrap();
        assert!(CellPartition::new(vec![a.clone(), b], cov, 1.0).is_err());
        assert!(CellPartition::new(vec![a], cov, 1.0).is_err());
    }

    #[test]
    fn partition_json_round_trip() {
        let cov = Window { x_lo: -3.0, x_hi: 3.0, p_lo: -2.0, p_hi: 2.0 };
        let part = CellPartition::uniform(cov, 3, 2, 1.0).unwrap();
        let back = CellPartition::from_json(&part.to_json().unwrap(), 1.0).unwrap();
        assert_eq!(back, part);
    }

    #[test]
    fn probabilities_on_simple_cells() {
        let w0 = field(0);
        let g = *w0.grid();
        let all = Cell::new("all", g.x_min, g.x_max, g.p_min, g.p_max, 1.0).unwrap();
        assert!((cell_probability(&w0, &all).unwrap().value - 1.0).abs() < 1e-6);
        let half = Cell::new("right", 0.0, g.x_max, g.p_min, g.p_max, 1.0).unwrap();
        assert!((cell_probability(&w0, &half).unwrap().value - 0.5).abs() < 1e-6);
        let outside = Cell::new("far", 0.0, 2.0 * g.x_max, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(cell_probability(&w0, &outside), Err(Error::Coverage(_))));

        let c = cfg(8);
        let (sx, sp) = (c.sigma_x(), c.sigma_p());
        let central = Cell::new("centre", -sx, sx, -sp, sp, 1.0).unwrap();
        let coarse = cell_probability(&field(1), &central).unwrap();
        let exact = -0.19469854146167448;
        assert!((coarse.value - exact).abs() <= coarse.err_bound);
        let g = PhaseGrid::symmetric(8.0 * sx, 8.0 * sp, 321, 321, c.hbar).unwrap();
        let p = cell_probability(&wigner_fock_analytic(1, &g, c.sigma).unwrap(), &central).unwrap();
        assert!((p.value - exact).abs() < 1e-6, "{}", p.value);
        assert!(p.negative);
    }

    #[test]
    fn indicator_chains_with_expectation() {
        let w1 = field(1);
        let c = Cell::new("k", -0.3, 1.1, -0.8, 0.4, 1.0).unwrap();
        let (x, p) = indicator_functions(&c);
        assert_eq!((x.eval(c.x_lo), x.eval(c.x_hi), p.eval(c.p_lo)), (1.0, 1.0, 1.0));
        assert_eq!(x.eval(c.x_hi + 1e-9), 0.0);
        let ind = cell_indicator(&c);
        assert_eq!(expectation(&w1, &ind).value, cell_probability(&w1, &c).unwrap().value);
        let w0 = field(0);
        assert!(expectation(&w0, &ind).value <= 1.0);
    }

    #[test]
    fn partition_sums_and_tail_check() {
        let w = field(1);
        let g = *w.grid();
        let part = CellPartition::uniform(g.window(), 4, 3, 1.0).unwrap();
        let rep = partition_probabilities(&w, &part).unwrap();
        assert!((rep.total - 1.0).abs() < 1e-6);
        let small = Window { x_lo: -1.0, x_hi: 1.0, p_lo: -1.0, p_hi: 1.0 };
        let part = CellPartition::uniform(small, 1, 1, 1.0).unwrap();
        assert!(matches!(partition_probabilities(&w, &part), Err(Error::Coverage(_))));
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("id,P,err_bound,negative_flag\nx0p0,"));
    }

    #[test]
    fn quantization_of_unity_and_position() {
        let c = cfg(16);
        let q = WeylQuantizer::new(&c).unwrap();
        let one = q.quantize(&|_: f64, _: f64| 1.0).unwrap();
        let id = DMatrix::<Complex64>::identity(16, 16);
        assert!((&one - &id).camax() < 1e-4);
        let x = q.quantize(&|x: f64, _: f64| x).unwrap();
        for m in 0..16 {
            for n in 0..16 {
                let want = if m + 1 == n {
                    c.sigma_x() * (n as f64).sqrt()
                } else if n + 1 == m {
                    c.sigma_x() * (m as f64).sqrt()
                } else {
                    0.0
                };
                assert!((x[(m, n)] - Complex64::new(want, 0.0)).norm() < 1e-6, "({m},{n}) {}", x[(m, n)]);
            }
        }
    }

    #[test]
    fn quantized_indicator_reproduces_cell_probability() {
        let c = cfg(12);
        let q = WeylQuantizer::new(&c).unwrap();
        let cell = Cell::new("k", -0.5, 1.0, -0.7, 0.6, 1.0).unwrap();
        let u = q.quantize(&cell_indicator(&cell)).unwrap();
        assert!((&u - u.adjoint()).camax() < 1e-12);
        let g = PhaseGrid::symmetric(6.0, 6.0, 241, 241, c.hbar).unwrap();
        for spec in [StateSpec::Vacuum, StateSpec::Fock { n: 1 }, StateSpec::Coherent { re: 0.5, im: -0.3 }] {
            let rho = spec.density(&c).unwrap();
            let tr: Complex64 = (u.clone() * rho.entries()).trace();
            let p = cell_probability(&wigner_from_weyl(&rho, &g).unwrap(), &cell).unwrap();
            assert!((tr.re - p.value).abs() < 1e-5, "{spec}: {} vs {}", tr.re, p.value);
        }
        let b = spectrum_bounds(&u);
        assert!(b.min > -0.5 && b.max < 1.5);
        let rho = fock_state(0, &c).unwrap();
        let many = q.quantize_many(&[&cell_indicator(&cell), &|_: f64, _: f64| 1.0]).unwrap();
        assert!((&many[0] - &u).camax() < 1e-14);
        assert!(((many[1].clone() * rho.entries()).trace().re - 1.0).abs() < 1e-6);
    }
}

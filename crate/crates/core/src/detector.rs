//! Plate detector of thickness `L`: a particle absorbed anywhere in the plate
//! is registered with a uniform position error and one of a ladder of
//! discrete momenta. Its readout is the partition of the plate's strip into
//! rectangles `[x0, x0+L] × [Δp(k−½), Δp(k+½)]`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cells::{cell_probability, partition_probabilities, Cell, CellPartition, PartitionReport};
use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, ScalarField, Window};
use crate::phase_space::wigner_from_weyl;
use crate::states::FockDensityMatrix;

/// Plate `[x0, x0 + length]` read out on momentum modes `k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub length: f64,
    pub x0: f64,
    pub k_min: i64,
    pub k_max: i64,
    pub hbar: f64,
}

impl DetectorSpec {
    pub fn new(length: f64, x0: f64, k_min: i64, k_max: i64, hbar: f64) -> Result<Self> {
        let d = DetectorSpec { length, x0, k_min, k_max, hbar };
        d.validate()?;
        Ok(d)
    }

    /// Plate starting at `x0` whose modes cover momenta within `p_reach` of
    /// the state's mean momentum, centred on the mode nearest that mean.
    pub fn for_state(rho: &FockDensityMatrix, length: f64, x0: f64, spacing: ModeSpacing, p_reach: f64) -> Result<Self> {
        let dp = spacing.value(length, rho.hbar())?;
        let (_, p_mean) = rho.ladder_moments().mean_position(rho.sigma(), rho.hbar());
        let centre = (p_mean / dp).round() as i64;
        let half = (p_reach / dp).ceil() as i64 + 1;
        Self::new(length, x0, centre - half, centre + half, rho.hbar())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter(format!("plate thickness must be positive, got {}", self.length)));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidParameter("plate offset must be finite".into()));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        if self.k_max < self.k_min {
            return Err(Error::InvalidParameter(format!("empty mode range {}..={}", self.k_min, self.k_max)));
        }
        Ok(())
    }
}

/// Momentum spacing `Δp` between detector modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpacing {
    /// `2πħ/L`, the spacing of plane waves periodic over the plate.
    Periodic,
    /// `πħ/(2L)`.
    Fine,
    /// Any explicit momentum spacing.
    Custom(f64),
}

impl ModeSpacing {
    pub fn value(&self, length: f64, hbar: f64) -> Result<f64> {
        let v = match self {
            ModeSpacing::Periodic => 2.0 * PI * hbar / length,
            ModeSpacing::Fine => PI * hbar / (2.0 * length),
            ModeSpacing::Custom(v) => *v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("mode spacing must be positive, got {v}")));
        }
        Ok(v)
    }
}

impl fmt::Display for ModeSpacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpacing::Periodic => write!(f, "periodic"),
            ModeSpacing::Fine => write!(f, "fine"),
            ModeSpacing::Custom(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for ModeSpacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(ModeSpacing::Periodic),
            "fine" => Ok(ModeSpacing::Fine),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .map(ModeSpacing::Custom)
                .ok_or_else(|| Error::InvalidParameter(format!("mode spacing must be periodic, fine or a positive number, got {other:?}"))),
        }
    }
}

/// Readout uncertainties of the plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorUncertainties {
    /// `L/(2√3)`, the deviation of a uniform distribution over the plate.
    pub sigma_x: f64,
    /// `1/(2√3)`, the deviation of the mode index over a unit bin.
    pub sigma_k: f64,
    /// `πħ/(√3 L)`
    pub sigma_p: f64,
    /// `σ_x σ_p = (π/3)(ħ/2)`
    pub product: f64,
}

pub fn detector_uncertainties(d: &DetectorSpec) -> DetectorUncertainties {
    let s3 = 3f64.sqrt();
    let sigma_x = d.length / (2.0 * s3);
    let sigma_p = PI * d.hbar / (s3 * d.length);
    DetectorUncertainties { sigma_x, sigma_k: 1.0 / (2.0 * s3), sigma_p, product: sigma_x * sigma_p }
}

/// Cells `k{k}` = `[x0, x0+L] × [Δp(k−½), Δp(k+½)]` for every mode; refused
/// when `L Δp < ħ/2`.
pub fn detector_partition(d: &DetectorSpec, spacing: ModeSpacing) -> Result<CellPartition> {
    d.validate()?;
    let dp = spacing.value(d.length, d.hbar)?;
    let bound = 0.5 * d.hbar;
    if d.length * dp < bound - 1e-12 {
        return Err(Error::SubQuantumCell { measure: d.length * dp, bound });
    }
    let (x_lo, x_hi) = (d.x0, d.x0 + d.length);
    let cells = (d.k_min..=d.k_max)
        .map(|k| Cell::new(format!("k{k}"), x_lo, x_hi, dp * (k as f64 - 0.5), dp * (k as f64 + 0.5), d.hbar))
        .collect::<Result<Vec<_>>>()?;
    let coverage = Window { x_lo, x_hi, p_lo: dp * (d.k_min as f64 - 0.5), p_hi: dp * (d.k_max as f64 + 0.5) };
    CellPartition::new(cells, coverage, d.hbar)
}

/// Probability registered in one momentum mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeReading {
    pub k: i64,
    pub p_k: f64,
    pub probability: f64,
    pub err_bound: f64,
}

/// Per-mode probabilities plus the mass that misses the plate's strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReadout {
    pub spec: DetectorSpec,
    pub spacing: f64,
    pub uncertainties: DetectorUncertainties,
    pub modes: Vec<ModeReading>,
    /// `Σ_k P_k`
    pub captured: f64,
    /// Mass of the Wigner field outside the read-out strip.
    pub escaped: f64,
    /// `captured + escaped`, one up to quadrature error.
    pub total: f64,
}

/// JSON summary of a readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSummary {
    pub length: f64,
    pub spacing: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
    pub product: f64,
    pub captured_mass: f64,
    pub escaped_mass: f64,
}

impl DetectorReadout {
    /// CSV with columns `k,p_k,P_k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,p_k,P_k")?;
        for m in &self.modes {
            writeln!(out, "{},{:e},{:e}", m.k, m.p_k, m.probability)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> ReadoutSummary {
        ReadoutSummary {
            length: self.spec.length,
            spacing: self.spacing,
            sigma_x: self.uncertainties.sigma_x,
            sigma_p: self.uncertainties.sigma_p,
            product: self.uncertainties.product,
            captured_mass: self.captured,
            escaped_mass: self.escaped,
        }
    }
}

/// Reads out a Wigner field already sampled on a grid. Mode cells are
/// clipped to the grid; cells entirely off the grid read zero.
pub fn readout_field(field: &ScalarField, d: &DetectorSpec, spacing: ModeSpacing) -> Result<DetectorReadout> {
    let part = detector_partition(d, spacing)?;
    let dp = spacing.value(d.length, d.hbar)?;
    let g = field.grid();
    let gw = g.window();
    let mut kept = Vec::new();
    let mut ks = Vec::new();
    for (k, c) in (d.k_min..=d.k_max).zip(part.cells()) {
        let clipped = Cell {
            id: c.id.clone(),
            x_lo: c.x_lo.max(gw.x_lo),
            x_hi: c.x_hi.min(gw.x_hi),
            p_lo: c.p_lo.max(gw.p_lo),
            p_hi: c.p_hi.min(gw.p_hi),
        };
        if clipped.x_hi > clipped.x_lo && clipped.p_hi > clipped.p_lo {
            kept.push(clipped);
            ks.push(k);
        }
    }
    let mut modes: Vec<ModeReading> =
        (d.k_min..=d.k_max).map(|k| ModeReading { k, p_k: dp * k as f64, probability: 0.0, err_bound: 0.0 }).collect();
    // Clipped cells may fall below ħ/2; they only bound integration regions.
    let mut captured = 0.0;
    for (k, c) in ks.iter().zip(&kept) {
        let p = cell_probability(field, c)?;
        let m = &mut modes[(k - d.k_min) as usize];
        m.probability = p.value;
        m.err_bound = p.err_bound;
        captured += p.value;
    }
    let whole = Cell { id: "grid".into(), x_lo: gw.x_lo, x_hi: gw.x_hi, p_lo: gw.p_lo, p_hi: gw.p_hi };
    let grid_mass = cell_probability(field, &whole)?.value;
    let escaped = grid_mass - captured;
    Ok(DetectorReadout {
        spec: *d,
        spacing: dp,
        uncertainties: detector_uncertainties(d),
        modes,
        captured,
        escaped,
        total: captured + escaped,
    })
}

/// Wigner function of `rho` on `grid`, read out by the plate.
pub fn detector_readout(rho: &FockDensityMatrix, d: &DetectorSpec, spacing: ModeSpacing, grid: &PhaseGrid) -> Result<DetectorReadout> {
    let field = wigner_from_weyl(rho, grid)?;
    readout_field(&field, d, spacing)
}

/// Readout that must capture the whole state: errors if the escaped mass
/// exceeds `1e-6`.
pub fn detector_probabilities(field: &ScalarField, d: &DetectorSpec, spacing: ModeSpacing) -> Result<PartitionReport> {
    partition_probabilities(field, &detector_partition(d, spacing)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::displace_density;
    use crate::states::{fock_state, PhysicsConfig, StateSpec};

    #[test]
    fn uncertainties_follow_closed_forms() {
        let s3 = 3f64.sqrt();
        let d = DetectorSpec::new(2.0 * s3, 0.0, -2, 2, 1.0).unwrap();
        let u = detector_uncertainties(&d);
        assert!((u.sigma_x - 1.0).abs() < 1e-15);
        assert!((u.sigma_k - 0.28867513459481287).abs() < 1e-15);
        for l in [0.3, 1.0, 7.5] {
            let u = detector_uncertainties(&DetectorSpec::new(l, 0.0, 0, 0, 1.0).unwrap());
            assert!((u.product - PI / 6.0).abs() < 1e-15);
            assert!(u.product > 0.5);
        }
    }

    #[test]
    fn partition_spacings() {
        let d = DetectorSpec::new(1.5, 0.0, -3, 3, 1.0).unwrap();
        let fine = detector_partition(&d, ModeSpacing::Fine).unwrap();
        assert!(fine.cells().iter().all(|c| (c.measure() - PI / 2.0).abs() < 1e-12));
        let periodic = detector_partition(&d, ModeSpacing::Periodic).unwrap();
        assert!(periodic.cells().iter().all(|c| (c.measure() - 2.0 * PI).abs() < 1e-12));
        let tiny = detector_partition(&d, ModeSpacing::Custom(1.0 / (4.0 * 1.5)));
        assert!(matches!(tiny, Err(Error::SubQuantumCell { .. })));
    }

    #[test]
    fn spacing_parses() {
        assert_eq!("periodic".parse::<ModeSpacing>().unwrap(), ModeSpacing::Periodic);
        assert_eq!("fine".parse::<ModeSpacing>().unwrap(), ModeSpacing::Fine);
        assert_eq!("0.25".parse::<ModeSpacing>().unwrap(), ModeSpacing::Custom(0.25));
        assert!("-1".parse::<ModeSpacing>().is_err());
    }

    fn grid(c: &PhysicsConfig) -> PhaseGrid {
        PhaseGrid::symmetric(12.0 * c.sigma_x(), 8.0 * c.sigma_p(), 161, 121, c.hbar).unwrap()
    }

    #[test]
    fn wide_plate_captures_vacuum() {
        let c = PhysicsConfig::default().with_cutoff(16).unwrap();
        let rho = fock_state(0, &c).unwrap();
        let g = grid(&c);
        let d = DetectorSpec::for_state(&rho, 16.0 * c.sigma_x(), -8.0 * c.sigma_x(), ModeSpacing::Fine, g.p_max).unwrap();
        let r = detector_readout(&rho, &d, ModeSpacing::Fine, &g).unwrap();
        assert!(r.escaped.abs() < 1e-6, "{}", r.escaped);
        assert!((r.total - 1.0).abs() < 1e-6);
        let best = r.modes.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap();
        assert_eq!(best.k, 0);
    }

    #[test]
    fn plate_edge_halves_vacuum() {
        let c = PhysicsConfig::default().with_cutoff(16).unwrap();
        let rho = fock_state(0, &c).unwrap();
        let g = grid(&c);
        let d = DetectorSpec::for_state(&rho, 20.0, 0.0, ModeSpacing::Periodic, g.p_max).unwrap();
        let r = detector_readout(&rho, &d, ModeSpacing::Periodic, &g).unwrap();
        assert!((r.captured - 0.5).abs() < 1e-3);
        assert!((r.total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn readout_is_translation_covariant() {
        let c = PhysicsConfig::default().with_cutoff(24).unwrap();
        let rho = StateSpec::Fock { n: 1 }.density(&c).unwrap();
        let g = grid(&c);
        let d = DetectorSpec::new(1.0, -0.2, -4, 4, c.hbar).unwrap();
        let shift = 1.3;
        let moved = displace_density(&rho, 0.0, shift, 1e-12).unwrap();
        let d2 = DetectorSpec { x0: d.x0 + shift, ..d };
        let a = detector_readout(&rho, &d, ModeSpacing::Fine, &g).unwrap();
        let b = detector_readout(&moved, &d2, ModeSpacing::Fine, &g).unwrap();
        for (ma, mb) in a.modes.iter().zip(&b.modes) {
            assert!((ma.probability - mb.probability).abs() < 1e-6);
        }
        assert!((a.total - 1.0).abs() < 1e-6 && (b.total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn csv_columns() {
        let c = PhysicsConfig::default().with_cutoff(8).unwrap();
        let rho = fock_state(0, &c).unwrap();
        let d = DetectorSpec::new(2.0, -1.0, -1, 1, 1.0).unwrap();
        let r = detector_readout(&rho, &d, ModeSpacing::Periodic, &grid(&c)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,p_k,P_k\n-1,"));
        assert_eq!(text.lines().count(), 4);
    }
}

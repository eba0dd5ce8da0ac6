//! Serialization round trips reproduce identical results.

use phasecell::cells::{refine_partition, Axis, CellPartition};
use phasecell::grid::{PhaseGrid, Window};
use phasecell::phase_space::wigner_from_weyl;
use phasecell::states::{DensityDocument, FockDensityMatrix, PhysicsConfig, StateSpec};

#[test]
fn density_json_reproduces_fields() {
    let c = PhysicsConfig::default().with_cutoff(48).unwrap();
    let g = PhaseGrid::symmetric(6.0, 6.0, 48, 48, c.hbar).unwrap();
    for spec in [StateSpec::Fock { n: 3 }, StateSpec::Coherent { re: 1.0, im: -0.5 }, StateSpec::Cat { a_over_sigma: 3.0 }] {
        let rho = spec.density(&c).unwrap();
        let text = serde_json::to_string(&rho.to_document()).unwrap();
        let doc: DensityDocument = serde_json::from_str(&text).unwrap();
        let back = FockDensityMatrix::from_document(&doc, c.tol_trace).unwrap();
        assert_eq!(back.entries(), rho.entries());
        let a = wigner_from_weyl(&rho, &g).unwrap();
        let b = wigner_from_weyl(&back, &g).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
    }
}

#[test]
fn partition_json_round_trips() {
    let w = Window { x_lo: -3.0, x_hi: 3.0, p_lo: -2.0, p_hi: 2.0 };
    let part = CellPartition::uniform(w, 3, 2, 1.0).unwrap();
    let part = refine_partition(&part, "x1p0", Axis::P).unwrap();
    let back = CellPartition::from_json(&part.to_json().unwrap(), 1.0).unwrap();
    assert_eq!(back.cells(), part.cells());
    assert_eq!(back.coverage(), part.coverage());
}

#[test]
fn malformed_documents_are_rejected() {
    let doc = DensityDocument { dim: 2, hbar: 1.0, sigma: 1.0, re: vec![vec![0.5, 0.0]], im: vec![vec![0.0; 2]; 2] };
    assert!(FockDensityMatrix::from_document(&doc, 1e-10).is_err());
    assert!(CellPartition::from_json("{\"coverage\": 1}", 1.0).is_err());
}

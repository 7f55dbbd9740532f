//! End-to-end runs of the three methods on small grids.

use edge_msfem::coefficient::{constant_field, synthetic_field, SyntheticKind};
use edge_msfem::fem;
use edge_msfem::local::build_pou;
use edge_msfem::mesh::build_grids;
use edge_msfem::metrics::error_report;
use edge_msfem::spaces::{coarse_solve, esmsfem_space, msfem_space, prepare, wemsfem_space, Oversampling};
use edge_msfem::wavelets::WaveletSpec;

#[test]
fn wemsfem_levels_are_nested_in_energy() {
    let grids = build_grids(4, 8).unwrap();
    let field = synthetic_field(&grids.fine, SyntheticKind::Channels, 1e4, 5).unwrap();
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f).unwrap();
    let off = prepare(&grids, &field).unwrap();
    let mut last = f64::INFINITY;
    for level in 0..=3 {
        for spec in [WaveletSpec::haar(level), WaveletSpec::hierarchical(level)] {
            let space = wemsfem_space(&grids, &field, &off, spec).unwrap();
            let sol = coarse_solve(&grids, &space, &field, &f).unwrap();
            let e = error_report(&grids, &sol, &u_h, &field, 0.0).unwrap().e_h1;
            if spec.kind == edge_msfem::wavelets::WaveletKind::Haar {
                assert!(e <= last + 1e-10, "level {level}: {e} after {last}");
                last = e;
            }
        }
    }
}

#[test]
fn esmsfem_enrichment_is_monotone() {
    let grids = build_grids(4, 8).unwrap();
    let field = synthetic_field(&grids.fine, SyntheticKind::Mixed, 1e3, 9).unwrap();
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f).unwrap();
    let off = prepare(&grids, &field).unwrap();
    let mut last = f64::INFINITY;
    for n_b in 1..=6 {
        let space = esmsfem_space(&grids, &field, &off, n_b).unwrap();
        let sol = coarse_solve(&grids, &space, &field, &f).unwrap();
        let e = error_report(&grids, &sol, &u_h, &field, 0.0).unwrap().e_h1;
        assert!(e <= last + 1e-10, "N_b={n_b}: {e} after {last}");
        last = e;
    }
}

#[test]
fn unit_coefficient_wemsfem_beats_msfem() {
    let grids = build_grids(4, 8).unwrap();
    let field = constant_field(&grids.fine, 1.0).unwrap();
    let f = vec![1.0; grids.fine.num_nodes()];
    let u_h = fem::fine_reference(&grids.fine, &field, &f).unwrap();
    let off = prepare(&grids, &field).unwrap();
    let we = wemsfem_space(&grids, &field, &off, WaveletSpec::haar(0)).unwrap();
    let ms = msfem_space(&grids, &field, &off.pou, Oversampling::None).unwrap();
    let e = |s| {
        let sol = coarse_solve(&grids, s, &field, &f).unwrap();
        error_report(&grids, &sol, &u_h, &field, 0.0).unwrap().e_h1
    };
    assert!(e(&we) <= e(&ms) + 1e-12);
}

#[test]
fn solutions_vanish_on_the_domain_boundary() {
    let grids = build_grids(4, 4).unwrap();
    let field = synthetic_field(&grids.fine, SyntheticKind::Inclusions, 1e5, 3).unwrap();
    let f = vec![1.0; grids.fine.num_nodes()];
    let off = prepare(&grids, &field).unwrap();
    let pou = build_pou(&grids, &field).unwrap();
    let spaces = [
        wemsfem_space(&grids, &field, &off, WaveletSpec::haar(1)).unwrap(),
        esmsfem_space(&grids, &field, &off, 3).unwrap(),
        msfem_space(&grids, &field, &pou, Oversampling::None).unwrap(),
        msfem_space(&grids, &field, &pou, Oversampling::Full).unwrap(),
    ];
    for space in &spaces {
        let sol = coarse_solve(&grids, space, &field, &f).unwrap();
        for p in grids.fine.boundary_nodes() {
            assert_eq!(sol.fine.values[p], 0.0, "{}", space.method);
        }
    }
}

#[test]
fn oversampling_is_reported_as_nonconforming() {
    let grids = build_grids(4, 4).unwrap();
    let field = synthetic_field(&grids.fine, SyntheticKind::Mixed, 1e2, 1).unwrap();
    let pou = build_pou(&grids, &field).unwrap();
    assert!(msfem_space(&grids, &field, &pou, Oversampling::None).unwrap().conforming);
    assert!(!msfem_space(&grids, &field, &pou, Oversampling::Half).unwrap().conforming);
}

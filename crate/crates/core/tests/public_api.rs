use std::f64::consts::PI;

use ahlfors::config::RunConfig;
use ahlfors::current::{evaluate_disc, metric_functionals};
use ahlfors::disc::LiftedDisc;
use ahlfors::quadrature::QuadratureGrid;
use ahlfors::torus::{test_forms, LatticeTorus};
use ahlfors::{Complex64, Exec};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn config_catalog_feeds_the_current_evaluator() {
    let cfg = RunConfig::parse(
        "[[catalog]]\nradius = 2.0\ncoeffs = [[[0.0, 0.0], [1.0, 0.0]]]\n",
    )
    .unwrap();
    let torus = cfg.torus().unwrap();
    let catalog = cfg.catalog().unwrap();
    assert_eq!(catalog.len(), 1);
    let (area, length, _) = metric_functionals(&catalog[0], &torus, &cfg.grid()).unwrap();
    assert!((area - 4.0 * PI).abs() < 1e-10, "area {area}");
    assert!((length - 4.0 * PI).abs() < 1e-10, "length {length}");
}

#[test]
fn execution_policies_agree_bit_for_bit() {
    let torus = LatticeTorus::unit_square();
    let forms = test_forms(&torus, 12);
    let disc = LiftedDisc::from_monomials(c(0.0, 0.0), 1.0, vec![vec![c(0.1, 0.0), c(1.0, 0.5), c(0.0, 0.3)]])
        .unwrap()
        .k_fold(5, c(0.0, 0.0))
        .unwrap();
    let seq = evaluate_disc(&disc, &torus, &forms, &QuadratureGrid::default().with_exec(Exec::Sequential)).unwrap();
    let par = evaluate_disc(&disc, &torus, &forms, &QuadratureGrid::default().with_exec(Exec::Parallel)).unwrap();
    assert_eq!(seq.area.to_bits(), par.area.to_bits());
    assert_eq!(seq.boundary_length.to_bits(), par.boundary_length.to_bits());
    for (a, b) in seq.pairings.iter().zip(&par.pairings) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn mismatched_dimension_is_rejected() {
    let torus = LatticeTorus::unit_square();
    let disc = LiftedDisc::from_monomials(c(0.0, 0.0), 1.0, vec![vec![c(0.0, 0.0), c(1.0, 0.0)]; 2]).unwrap();
    assert!(evaluate_disc(&disc, &torus, &[], &QuadratureGrid::default()).is_err());
}

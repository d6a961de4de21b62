mod common;

use aads_core::charges::compute_charges;
use aads_core::geometry::{gauss_legendre, QuadratureSpec};
use aads_core::initial_data::{model_from_json, DerivativeMode};
use std::f64::consts::PI;

#[test]
fn gauss_legendre_matches_jacobi_eigenproblem() {
    for n in [2, 5, 16, 24, 64] {
        let (x, w) = gauss_legendre(n);
        let (xo, wo) = common::golub_welsch(n);
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for ((x, w), (xo, wo)) in pairs.iter().zip(xo.iter().zip(&wo)) {
            assert!((x - xo).abs() < 1e-13, "n={n}: node {x} vs {xo}");
            assert!((w - wo).abs() < 1e-13, "n={n}: weight {w} vs {wo}");
        }
    }
}

#[test]
fn mass_aspect_oracle_reproduces_radial_bump_profile() {
    let m = 0.1;
    let model = model_from_json(r#"{"name":"radial_bump","params":{"m":0.1}}"#).unwrap();
    for r in [1.0, 2.5, 4.0] {
        let f = m * (-4.0 * r as f64).exp();
        let expected = 15.0 * f + 4.0 * f * f;
        let got = common::mass_aspect_radial(model.as_ref(), [r, 1.1, 0.7, 2.0], 1.0, 1e-5);
        assert!((got - expected).abs() < 1e-8 * expected, "r={r}: {got} vs {expected}");
    }
}

#[test]
fn radial_bump_energy_matches_brute_force_oracle() {
    let model = model_from_json(r#"{"name":"radial_bump","params":{"m":0.1}}"#).unwrap();
    let oracle = common::energy_oracle(model.as_ref(), 1.0);
    let cs = compute_charges(model.as_ref(), &QuadratureSpec::default(), DerivativeMode::Auto).unwrap();
    assert!((cs.e0 - oracle.value).abs() < 1e-6 * oracle.value);
    let closed = 15.0 * PI * 0.1 / 128.0;
    assert!((closed - oracle.value).abs() <= oracle.residual, "{closed} vs {} (residual {})", oracle.value, oracle.residual);
}

#[test]
fn energy_scales_with_curvature() {
    let model = model_from_json(r#"{"name":"radial_bump","params":{"m":0.2,"kappa":2.0}}"#).unwrap();
    let cs = compute_charges(model.as_ref(), &QuadratureSpec::for_constants(&model.constants()), DerivativeMode::Auto)
        .unwrap();
    let closed = 15.0 * PI * 0.2 / (128.0 * 4.0);
    assert!((cs.e0 - closed).abs() < 1e-8 * closed);
    let oracle = common::energy_at_radius(model.as_ref(), 2.0, 5.0, 12, 1e-5);
    assert!((cs.e0 - oracle).abs() < 1e-6 * closed);
}

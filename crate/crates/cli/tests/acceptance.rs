#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use aads_core::charges::{compute_charges, ChargeSet};
use aads_core::clifford::{gamma, verify_anticommutators};
use aads_core::geometry::{ModelConstants, QuadratureSpec};
use aads_core::initial_data::{model_from_json, DerivativeMode};
use aads_core::killing::{residual_samples as killing_samples, sample_points, KillingLabel};
use aads_core::qmatrix::{
    assemble_q, boundary_identity, check_sample, psd_check, rigidity_check, sample_psd_charges,
    sample_psd_charges_with, summarize, theorem_bounds, BoundVariant, DeltaMode, IdentityMode, RigidityOutcome,
    SamplerConfig,
};
use aads_core::spinors::{residual_samples as spinor_samples, KillingParams};
use aads_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn clifford() -> Verdict {
    let checks = verify_anticommutators();
    let exact = checks.iter().filter(|c| c.holds).count();
    let herm = gamma(0).unwrap().is_hermitian();
    let anti = (1..5).all(|a| gamma(a).unwrap().is_anti_hermitian());
    verdict(
        exact == 25 && herm && anti,
        format!("{exact}/25 relations exact, gamma_0 Hermitian {herm}, gamma_1..4 anti-Hermitian {anti}"),
    )
}

fn spinors() -> Verdict {
    let k = ModelConstants::new(1.0).unwrap();
    let samples = spinor_samples(1, 100, 1e-3, &k).unwrap();
    let ok = samples
        .iter()
        .filter(|s| s.residual_h < 1e-5 * s.spinor_norm && s.ratio.is_some_and(|r| (3.5..=4.5).contains(&r)))
        .count();
    let worst = samples.iter().map(|s| s.residual_h / s.spinor_norm).fold(0.0, f64::max);
    verdict(ok == 100, format!("{ok}/100 samples, max residual/|Phi| = {worst:.2e}"))
}

fn killing() -> Verdict {
    let k = ModelConstants::new(1.0).unwrap();
    let points = sample_points(1, 20, &k);
    let samples = killing_samples(&KillingLabel::CANONICAL, &points, 1e-3, &k).unwrap();
    let mut failing = Vec::new();
    let mut coordinate_max = 0.0f64;
    for label in KillingLabel::CANONICAL {
        let coordinate = matches!((label.alpha, label.beta), (1, 2) | (5, 0));
        let ok = samples.iter().filter(|s| s.label == label).all(|s| {
            if coordinate {
                coordinate_max = coordinate_max.max(s.residual_h);
                s.residual_h < 1e-12
            } else {
                s.ratio.is_some_and(|r| (3.5..=4.5).contains(&r))
            }
        });
        if !ok {
            failing.push(label.to_string());
        }
    }
    verdict(
        failing.is_empty(),
        format!("{}/15 fields, U12/U50 max residual {coordinate_max:.1e}, failing {failing:?}", 15 - failing.len()),
    )
}

fn exact_ads() -> Verdict {
    let model = model_from_json(r#"{"name":"ads_exact","params":{}}"#).unwrap();
    let cs = compute_charges(model.as_ref(), &QuadratureSpec::default(), DerivativeMode::Auto).unwrap();
    let max = cs.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    verdict(max < 1e-10, format!("max |charge| = {max:.2e}"))
}

fn charges_oracle() -> Verdict {
    let model = model_from_json(r#"{"name":"radial_bump","params":{"m":0.1,"sigma":4,"kappa":1}}"#).unwrap();
    let oracle = common::energy_oracle(model.as_ref(), 1.0);
    let cs = compute_charges(model.as_ref(), &QuadratureSpec::default(), DerivativeMode::Auto).unwrap();
    let closed = 15.0 * PI * 0.1 / 128.0;
    let rel = (cs.e0 - oracle.value).abs() / oracle.value;
    let closed_gap = (closed - oracle.value).abs();
    let others = cs.to_array()[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    verdict(
        rel < 1e-6 && closed_gap <= oracle.residual && others < 1e-8,
        format!(
            "E0 = {:.12e}, oracle rel. err {rel:.1e}, |closed - oracle| {closed_gap:.1e} <= residual {:.1e}, others max {others:.1e}",
            cs.e0, oracle.residual
        ),
    )
}

fn identity() -> Verdict {
    let models = [
        r#"{"name":"radial_bump","params":{"m":0.1}}"#,
        r#"{"name":"offdiag_momentum","params":{"q":0.3,"axis":2,"profile":"sin_theta"}}"#,
        r#"{"name":"offdiag_momentum","params":{"q":0.3,"axis":3,"profile":"cos_phi"}}"#,
    ];
    let quad = QuadratureSpec {
        ntheta: 16,
        npsi: 16,
        nphi: 16,
        ..QuadratureSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let lambdas: Vec<KillingParams> = (0..8)
        .map(|_| {
            KillingParams::new(std::array::from_fn(|_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }))
        })
        .collect();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for m in models {
        let model = model_from_json(m).unwrap();
        for lambda in &lambdas {
            for mode in [IdentityMode::Leading, IdentityMode::Exact] {
                let r = boundary_identity(model.as_ref(), lambda, &quad, mode).unwrap();
                worst = worst.max(r.gap);
                runs += 1;
            }
        }
    }
    verdict(worst < 1e-5, format!("{runs} runs, max relative gap {worst:.2e}"))
}

fn property_suite() -> Verdict {
    let samples = sample_psd_charges(20240, 10_000);
    let checks: Vec<_> = samples.iter().map(|s| check_sample(s).unwrap()).collect();
    let summary = summarize(&checks);
    let b1 = theorem_bounds(&charge(&[(0, 1.0), (4, 1.0)]), BoundVariant::Proof);
    let b45 = theorem_bounds(&charge(&[(0, 1.0), (7, 1.0)]), BoundVariant::Proof);
    let equality = (b1.b1 - 1.0).abs() < 1e-12 && (b45.b4 - 1.0).abs() < 1e-12 && (b45.b5 - 1.0).abs() < 1e-12;
    verdict(
        summary.passed == summary.n && equality,
        format!(
            "{}/{} samples, min E0 - max B {:.1e}, max det rel. err {:.1e}, min S {:.1e}, equality cases B1={} B4={} B5={}",
            summary.passed, summary.n, summary.min_bound_margin, summary.max_det_rel_err, summary.min_s, b1.b1, b45.b4, b45.b5
        ),
    )
}

/// Charge set with the listed entries of the flat layout
/// `[e0, c1..c4, c'1..c'4, J12, J13, J14, J23, J24, J34]`.
fn charge(entries: &[(usize, f64)]) -> ChargeSet {
    let mut v = [0.0; 15];
    for &(i, x) in entries {
        v[i] = x;
    }
    ChargeSet::from_array(v)
}

fn rigidity() -> Verdict {
    let mut in_domain = 0;
    let mut worst = 0.0f64;
    let mut ok = true;
    for (seed, scale) in [(1u64, 1e-13), (2, 1e-14), (3, 1.0)] {
        let cfg = SamplerConfig {
            scale,
            delta: DeltaMode::Zero,
        };
        for s in sample_psd_charges_with(seed, 2000, &cfg) {
            if s.charges.e0 >= 1e-12 {
                continue;
            }
            match rigidity_check(&s.charges, 1e-12, 1e-9).unwrap() {
                RigidityOutcome::Checked { frobenius, .. } => {
                    in_domain += 1;
                    worst = worst.max(frobenius);
                    ok &= frobenius < 1e-9;
                }
                RigidityOutcome::NotInRigidityDomain { .. } => ok = false,
            }
        }
    }
    let counter = charge(&[(4, 1.0)]);
    let rejected = !psd_check(&assemble_q(&counter)).unwrap().psd
        && matches!(rigidity_check(&counter, 1e-12, 1e-9).unwrap(), RigidityOutcome::NotInRigidityDomain { .. });
    verdict(
        ok && in_domain > 0 && rejected,
        format!("{in_domain} boundary samples with E0 < 1e-12, max |Q|_F {worst:.1e}, E0=0 c4=1 rejected {rejected}"),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("r1.json"), dir.path().join("r2.json")];
    for p in &paths {
        let status = Command::new(env!("CARGO_BIN_EXE_aads"))
            .args(["sample-psd", "--n", "1000", "--seed", "7", "--quiet", "--out"])
            .arg(p)
            .status()
            .unwrap();
        if !status.success() {
            return verdict(false, format!("sample-psd exited with {status}"));
        }
    }
    let (a, b) = (std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    verdict(a == b, format!("{} bytes, identical {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, f64); 9] = [
        ("clifford relations", clifford, 1.0),
        ("killing spinors", spinors, 5.0),
        ("killing vector fields", killing, 10.0),
        ("exact AdS charges", exact_ads, 5.0),
        ("charges oracle", charges_oracle, 30.0),
        ("boundary identity", identity, 120.0),
        ("theorem properties", property_suite, 30.0),
        ("rigidity", rigidity, 5.0),
        ("determinism", determinism, f64::INFINITY),
    ];
    let mut failed = 0;
    for (n, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = v.pass && secs < *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({secs:.2}s): {}",
            n + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

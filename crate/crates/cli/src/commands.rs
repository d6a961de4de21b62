use std::path::Path;

use aads_core::charges::{compute_charges, derived, ChargeSet, DerivedCharges, CHARGE_NAMES};
use aads_core::clifford::{gamma, verify_anticommutators, AnticommutatorCheck};
use aads_core::geometry::{ModelConstants, QuadratureSpec};
use aads_core::initial_data::{decay_validate, model_from_config, DerivativeMode, GridModel, InitialData, ModelConfig};
use aads_core::killing::{residual_samples as killing_samples, sample_points, KillingLabel, KillingSample};
use aads_core::qmatrix::{
    assemble_q, boundary_identity, check_sample, psd_check, sample_psd_charges_with, summarize, theorem_bounds,
    BoundVariant, BoundsReport, IdentityMode, PsdReport, SamplerConfig,
};
use aads_core::spinors::{residual_samples as spinor_samples, KillingParams, ResidualSample};
use aads_core::{Complex64, Error};
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command, ModeArg, ModelArgs, QuadArgs, Suite, VariantArg};

/// Verdict of a command, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Divergent,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Divergent => 3,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// Exit code for an error: 2 for bad input, 3 for divergence, 1 otherwise.
pub fn error_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Divergent(_)) => 3,
        Some(
            Error::InvalidParameter(_)
            | Error::UnknownModel(_)
            | Error::GridFormat { .. }
            | Error::Io(_)
            | Error::InvalidIndex(_),
        ) => 2,
        Some(_) => 1,
        None if e.downcast_ref::<UsageError>().is_some() => 2,
        None => 1,
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::error::Error for UsageError {}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config: C,
    pass: bool,
    result: R,
}

fn emit<C: Serialize, R: Serialize>(cli: &Cli, command: &str, config: C, pass: bool, result: R) -> Result<()> {
    if let Some(path) = &cli.out {
        let report = Report {
            command,
            config,
            pass,
            result,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn say(cli: &Cli, line: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", line.as_ref());
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Verify { suite } => match suite {
            Suite::Clifford => verify_clifford(cli),
            Suite::Spinors {
                samples,
                seed,
                h,
                kappa,
            } => verify_spinors(cli, *samples, *seed, *h, *kappa),
            Suite::Killing {
                label,
                samples,
                seed,
                h,
                kappa,
            } => verify_killing(cli, label.as_deref(), *samples, *seed, *h, *kappa),
        },
        Command::Charges { model, quad } => charges(cli, model, quad),
        Command::Qmatrix { charges, variant } => qmatrix(cli, charges, *variant),
        Command::Bound { model, quad, variant } => bound(cli, model, quad, *variant),
        Command::Identity {
            model,
            quad,
            lambda,
            mode,
        } => identity(cli, model, quad, lambda, *mode),
        Command::SamplePsd {
            n,
            seed,
            scale,
            variant,
        } => sample_psd(cli, *n, *seed, *scale, *variant),
        Command::Decay { model, radii } => decay(cli, model, radii.as_deref()),
    }
}

fn variant(v: VariantArg) -> BoundVariant {
    match v {
        VariantArg::Proof => BoundVariant::Proof,
        VariantArg::Text => BoundVariant::Text,
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("invalid {what} value `{t}`"))))
        .collect()
}

/// Loads a model from inline JSON, a JSON file or an AADS-ID grid file.
fn load_model(arg: &ModelArgs) -> Result<Box<dyn InitialData>> {
    let text = arg.model.trim();
    if text.starts_with('{') {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| usage(format!("invalid model JSON: {e}")))?;
        return Ok(model_from_config(&cfg)?);
    }
    let path = Path::new(text);
    let body = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read model `{text}`: {e}")))?;
    if body.trim_start().starts_with("aads-id") {
        return Ok(Box::new(GridModel::load(path)?));
    }
    let cfg: ModelConfig =
        serde_json::from_str(&body).map_err(|e| usage(format!("invalid model JSON in {text}: {e}")))?;
    Ok(model_from_config(&cfg)?)
}

fn resolve_quad(q: &QuadArgs, k: &ModelConstants) -> Result<QuadratureSpec> {
    let mut spec = QuadratureSpec::for_constants(k);
    if let Some(n) = q.ntheta {
        spec.ntheta = n;
    }
    if let Some(n) = q.npsi {
        spec.npsi = n;
    }
    if let Some(n) = q.nphi {
        spec.nphi = n;
    }
    if let Some(r) = &q.radii {
        spec.radii = parse_list(r, "radius")?;
    }
    if let Some(t) = q.rtol {
        spec.rel_tol = t;
    }
    spec.validate()?;
    Ok(spec)
}

fn quad_config(model: &dyn InitialData, spec: &QuadratureSpec) -> Value {
    match model.native_grid() {
        Some(g) => json!({ "native_grid": g, "rel_tol": spec.rel_tol }),
        None => serde_json::to_value(spec).expect("serializable"),
    }
}

fn verify_clifford(cli: &Cli) -> Result<Outcome> {
    #[derive(Serialize)]
    struct Result_ {
        anticommutators: Vec<AnticommutatorCheck>,
        gamma0_hermitian: bool,
        spatial_anti_hermitian: [bool; 4],
    }
    let anticommutators = verify_anticommutators();
    let gamma0_hermitian = gamma(0)?.is_hermitian();
    let spatial_anti_hermitian = [1, 2, 3, 4].map(|a| gamma(a).map(|g| g.is_anti_hermitian()).unwrap_or(false));
    let holds = anticommutators.iter().filter(|c| c.holds).count();
    let pass = holds == 25 && gamma0_hermitian && spatial_anti_hermitian.iter().all(|b| *b);
    say(cli, "alpha beta  -2eta  holds");
    for c in &anticommutators {
        say(cli, format!("{:>5} {:>4} {:>6}  {}", c.alpha, c.beta, c.expected, c.holds));
    }
    say(cli, format!("gamma_0 Hermitian: {gamma0_hermitian}"));
    say(cli, format!("gamma_1..4 anti-Hermitian: {spatial_anti_hermitian:?}"));
    say(cli, format!("{holds}/25 anticommutator identities exact"));
    emit(
        cli,
        "verify clifford",
        json!({}),
        pass,
        Result_ {
            anticommutators,
            gamma0_hermitian,
            spatial_anti_hermitian,
        },
    )?;
    Ok(Outcome::from_pass(pass))
}

fn spinor_sample_ok(s: &ResidualSample) -> bool {
    s.residual_h < 1e-5 * s.spinor_norm && s.ratio.is_some_and(|r| (3.5..=4.5).contains(&r))
}

fn verify_spinors(cli: &Cli, samples: usize, seed: u64, h: f64, kappa: f64) -> Result<Outcome> {
    let k = ModelConstants::new(kappa)?;
    let res = spinor_samples(seed, samples, h, &k)?;
    let passed = res.iter().filter(|s| spinor_sample_ok(s)).count();
    let worst_rel = res.iter().map(|s| s.residual_h / s.spinor_norm).fold(0.0, f64::max);
    let (rmin, rmax) = res
        .iter()
        .filter_map(|s| s.ratio)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
    say(cli, format!("samples: {samples}, passed: {passed}"));
    say(cli, format!("max residual/|Phi| at h={h:e}: {worst_rel:.3e}"));
    say(cli, format!("convergence ratio range: [{rmin:.4}, {rmax:.4}]"));
    let pass = passed == samples;
    emit(
        cli,
        "verify spinors",
        json!({ "samples": samples, "seed": seed, "h": h, "kappa": kappa }),
        pass,
        json!({ "passed": passed, "max_relative_residual": worst_rel, "ratio_min": rmin, "ratio_max": rmax, "samples": res }),
    )?;
    Ok(Outcome::from_pass(pass))
}

/// Coordinate symmetries give an exactly vanishing residual; all other
/// fields must show second-order convergence.
pub fn killing_sample_ok(s: &KillingSample) -> bool {
    let (c, _) = s.label.canonical();
    let coordinate = (c.alpha, c.beta) == (1, 2) || (c.alpha, c.beta) == (5, 0);
    if coordinate {
        return s.residual_h < 1e-12;
    }
    s.residual_h < 1e-12 || s.ratio.is_some_and(|r| (3.5..=4.5).contains(&r))
}

fn verify_killing(cli: &Cli, label: Option<&str>, samples: usize, seed: u64, h: f64, kappa: f64) -> Result<Outcome> {
    let k = ModelConstants::new(kappa)?;
    let labels: Vec<KillingLabel> = match label {
        Some(l) => vec![l.parse::<KillingLabel>()?],
        None => KillingLabel::CANONICAL.to_vec(),
    };
    let points = sample_points(seed, samples, &k);
    let res = killing_samples(&labels, &points, h, &k)?;
    let mut pass = true;
    let mut rows = Vec::new();
    say(cli, "label   max residual(h)   ratio range        pass");
    for l in &labels {
        let mine: Vec<&KillingSample> = res.iter().filter(|s| s.label == *l).collect();
        let worst = mine.iter().map(|s| s.residual_h).fold(0.0, f64::max);
        let (rmin, rmax) = mine
            .iter()
            .filter_map(|s| s.ratio)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        let ok = mine.iter().all(|s| killing_sample_ok(s));
        pass &= ok;
        let range = if rmin.is_finite() {
            format!("[{rmin:.3}, {rmax:.3}]")
        } else {
            "exact".to_string()
        };
        say(cli, format!("{:<6}  {:>15.3e}   {:<16}   {}", l.to_string(), worst, range, ok));
        rows.push(json!({ "label": l.to_string(), "max_residual": worst, "ratio_min": rmin.is_finite().then_some(rmin), "ratio_max": rmax.is_finite().then_some(rmax), "pass": ok }));
    }
    emit(
        cli,
        "verify killing",
        json!({ "labels": labels.iter().map(|l| l.to_string()).collect::<Vec<_>>(), "samples": samples, "seed": seed, "h": h, "kappa": kappa }),
        pass,
        json!({ "labels": rows }),
    )?;
    Ok(Outcome::from_pass(pass))
}

fn print_charges(cli: &Cli, cs: &ChargeSet) {
    say(cli, "charge       value              extrap. resid.   converged");
    let values = cs.to_array();
    for (n, name) in CHARGE_NAMES.iter().enumerate() {
        let d = cs.diagnostics.get(n);
        let (res, conv) = d
            .map(|d| {
                let conv = if d.divergent {
                    "DIVERGENT".to_string()
                } else {
                    (d.limit_converged && d.quadrature_converged).to_string()
                };
                (format!("{:.3e}", d.extrapolation_residual), conv)
            })
            .unwrap_or_else(|| ("-".into(), "-".into()));
        say(cli, format!("{name:<6} {:>22.14e}   {res:>12}   {conv}", values[n]));
    }
}

fn charge_outcome(cs: &ChargeSet) -> Outcome {
    if cs.any_divergent() {
        Outcome::Divergent
    } else {
        Outcome::from_pass(cs.all_converged())
    }
}

fn charges(cli: &Cli, model: &ModelArgs, quad: &QuadArgs) -> Result<Outcome> {
    let m = load_model(model)?;
    let spec = resolve_quad(quad, &m.constants())?;
    let cs = compute_charges(m.as_ref(), &spec, DerivativeMode::Auto)?;
    print_charges(cli, &cs);
    let outcome = charge_outcome(&cs);
    emit(
        cli,
        "charges",
        json!({ "model": m.config(), "quadrature": quad_config(m.as_ref(), &spec) }),
        outcome == Outcome::Pass,
        &cs,
    )?;
    Ok(outcome)
}

#[derive(Serialize)]
struct QReport {
    q: Vec<Vec<[f64; 2]>>,
    eigenvalues: [f64; 4],
    psd: PsdReport,
    bounds: BoundsReport,
    derived: DerivedCharges,
    verdict: bool,
}

fn q_report(cs: &ChargeSet, v: BoundVariant) -> Result<QReport> {
    let q = assemble_q(cs);
    let full = q.full();
    let psd = psd_check(&q)?;
    let bounds = theorem_bounds(cs, v);
    let rows = (0..4)
        .map(|i| (0..4).map(|j| [full[(i, j)].re, full[(i, j)].im]).collect())
        .collect();
    Ok(QReport {
        q: rows,
        eigenvalues: psd.eigenvalues,
        verdict: psd.psd && bounds.verdict,
        psd,
        bounds,
        derived: derived(cs),
    })
}

fn print_q(cli: &Cli, r: &QReport) {
    say(cli, "Q =");
    for row in &r.q {
        let cells: Vec<String> = row.iter().map(|[re, im]| format!("{re:>11.4e}{im:+.4e}i")).collect();
        say(cli, format!("  {}", cells.join("  ")));
    }
    say(cli, format!("eigenvalues: {:?}", r.eigenvalues));
    say(cli, format!("PSD: {} (min eigenvalue {:.3e})", r.psd.psd, r.psd.min_eigenvalue));
    let b = &r.bounds;
    say(cli, format!("E0 = {:.10e}", b.e0));
    for (name, v) in [("B1", b.b1), ("B2", b.b2), ("B3", b.b3), ("B4", b.b4), ("B5", b.b5)] {
        say(cli, format!("{name} = {v:.10e}"));
    }
    say(cli, format!("W = {:.6e}, F = {:.6e}, A = {:.6e}", b.w, b.f, b.a));
    say(cli, format!("verdict: {}", if r.verdict { "pass" } else { "fail" }));
}

fn qmatrix(cli: &Cli, charges: &Path, v: VariantArg) -> Result<Outcome> {
    let text = std::fs::read_to_string(charges).map_err(|e| usage(format!("cannot read {}: {e}", charges.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("invalid JSON: {e}")))?;
    // accept either a bare charge set or a `charges` report
    let body = if value.get("result").is_some() && value.get("e0").is_none() {
        value["result"].clone()
    } else {
        value
    };
    let cs: ChargeSet = serde_json::from_value(body).map_err(|e| usage(format!("invalid charge set: {e}")))?;
    let report = q_report(&cs, variant(v))?;
    print_q(cli, &report);
    let pass = report.verdict;
    emit(
        cli,
        "qmatrix",
        json!({ "charges": charges, "variant": variant(v) }),
        pass,
        &report,
    )?;
    Ok(Outcome::from_pass(pass))
}

fn bound(cli: &Cli, model: &ModelArgs, quad: &QuadArgs, v: VariantArg) -> Result<Outcome> {
    let m = load_model(model)?;
    let spec = resolve_quad(quad, &m.constants())?;
    let cs = compute_charges(m.as_ref(), &spec, DerivativeMode::Auto)?;
    print_charges(cli, &cs);
    let report = q_report(&cs, variant(v))?;
    print_q(cli, &report);
    let outcome = match charge_outcome(&cs) {
        Outcome::Pass => Outcome::from_pass(report.verdict),
        other => other,
    };
    emit(
        cli,
        "bound",
        json!({ "model": m.config(), "quadrature": quad_config(m.as_ref(), &spec), "variant": variant(v) }),
        outcome == Outcome::Pass,
        json!({ "charges": cs, "qmatrix": report }),
    )?;
    Ok(outcome)
}

fn parse_lambda(s: &str) -> Result<KillingParams> {
    let v = parse_list(s, "lambda")?;
    if v.len() != 8 {
        return Err(usage(format!("--lambda needs 8 numbers, got {}", v.len())));
    }
    Ok(KillingParams::new(std::array::from_fn(|i| Complex64::new(v[2 * i], v[2 * i + 1]))))
}

fn identity(cli: &Cli, model: &ModelArgs, quad: &QuadArgs, lambda: &str, mode: ModeArg) -> Result<Outcome> {
    let m = load_model(model)?;
    let spec = resolve_quad(quad, &m.constants())?;
    let lambda = parse_lambda(lambda)?;
    let mode = match mode {
        ModeArg::Leading => IdentityMode::Leading,
        ModeArg::Exact => IdentityMode::Exact,
    };
    let r = boundary_identity(m.as_ref(), &lambda, &spec, mode)?;
    say(cli, format!("mode: {mode:?}"));
    say(cli, format!("boundary integral : {:.12e}", r.lhs));
    say(cli, format!("8 pi lambda^T Q lambda: {:.12e}", r.rhs));
    say(cli, format!("relative gap: {:.3e}", r.gap));
    let pass = r.gap < 1e-5;
    emit(
        cli,
        "identity",
        json!({ "model": m.config(), "quadrature": quad_config(m.as_ref(), &spec), "lambda": lambda, "mode": mode }),
        pass,
        &r,
    )?;
    Ok(Outcome::from_pass(pass))
}

fn sample_psd(cli: &Cli, n: usize, seed: u64, scale: f64, v: VariantArg) -> Result<Outcome> {
    if n == 0 {
        bail!(usage("--n must be at least 1"));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        bail!(usage("--scale must be finite and non-negative"));
    }
    let cfg = SamplerConfig {
        scale,
        ..Default::default()
    };
    let samples = sample_psd_charges_with(seed, n, &cfg);
    let checks = samples.iter().map(check_sample).collect::<aads_core::Result<Vec<_>>>()?;
    let summary = summarize(&checks);
    let variant = variant(v);
    let selected_violations = match variant {
        BoundVariant::Proof => summary.n - summary.passed,
        BoundVariant::Text => summary.text_b2_violations,
    };
    say(cli, format!("samples: {n}, seed: {seed}, scale: {scale}"));
    say(cli, format!("proof-variant checks passed: {}/{}", summary.passed, summary.n));
    say(cli, format!("min E0 - max(B): {:.3e}", summary.min_bound_margin));
    say(cli, format!("min second-minor forms: {:.3e}, {:.3e}", summary.min_minor2_first, summary.min_minor2_second));
    say(cli, format!("min S: {:.3e}", summary.min_s));
    say(cli, format!("max det relative error: {:.3e}", summary.max_det_rel_err));
    say(cli, format!("theorem-text B2 violations: {}", summary.text_b2_violations));
    say(cli, format!("min A - 2 sqrt2 W: {:.3e}", summary.min_a_minus_2sqrt2_w));
    let pass = selected_violations == 0;
    emit(
        cli,
        "sample-psd",
        json!({ "n": n, "seed": seed, "scale": scale, "variant": variant, "delta": cfg.delta }),
        pass,
        &summary,
    )?;
    Ok(Outcome::from_pass(pass))
}

fn decay(cli: &Cli, model: &ModelArgs, radii: Option<&str>) -> Result<Outcome> {
    let m = load_model(model)?;
    let radii = match (radii, m.native_grid()) {
        (Some(r), _) => parse_list(r, "radius")?,
        (None, Some(g)) => g.radii,
        (None, None) => QuadratureSpec::for_constants(&m.constants()).radii,
    };
    let r = decay_validate(m.as_ref(), &radii).map_err(|e| anyhow!(e))?;
    let show = |s: Option<f64>| s.map_or("zero field".to_string(), |s| format!("{s:.4}"));
    say(cli, format!("tau = {}", r.tau));
    say(cli, format!("sigma(a) = {}", show(r.sigma_a)));
    say(cli, format!("sigma(nabla a) = {}", show(r.sigma_nabla_a)));
    say(cli, format!("sigma(h) = {}", show(r.sigma_h)));
    say(cli, format!("verdict: {}", if r.pass { "pass" } else { "fail" }));
    emit(cli, "decay", json!({ "model": m.config(), "radii": radii }), r.pass, &r)?;
    Ok(Outcome::from_pass(r.pass))
}

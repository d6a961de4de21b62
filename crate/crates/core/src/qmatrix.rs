//! The Hermitian charge matrix `Q`, positivity checks, the lower bounds on
//! `E₀`, rigidity, a sampler of admissible charges and the boundary
//! identity `lim ∫(boundary term) = 8π λ†Qλ`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charges::{compute_charges, derived, dot, ChargeSet};
use crate::clifford::{bilinear, gamma_complex, SpinorValue};
use crate::error::{Error, Result};
use crate::geometry::{radial_limit_with_floor, surface_integrate, QuadratureSpec, RadialLimit, SlicePoint};
use crate::initial_data::{divergence_part, momentum_aspect, trace_correction, DerivativeMode, InitialData};
use crate::spinors::{killing_spinor, profiles, KillingParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `Q = [[E, L], [L†, Ê]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QMatrix {
    pub e: Matrix2<Complex64>,
    pub e_hat: Matrix2<Complex64>,
    pub l: Matrix2<Complex64>,
}

impl QMatrix {
    pub fn full(&self) -> Matrix4<Complex64> {
        let mut q = Matrix4::zeros();
        q.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.e);
        q.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.l);
        q.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.l.adjoint());
        q.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.e_hat);
        q
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.full().norm()
    }

    /// `λ†Qλ`, real for Hermitian `Q`.
    pub fn quadratic_form(&self, lambda: &KillingParams) -> f64 {
        let q = self.full();
        let mut acc = c(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += lambda.0[i].conj() * q[(i, j)] * lambda.0[j];
            }
        }
        acc.re
    }
}

pub fn assemble_q(cs: &ChargeSet) -> QMatrix {
    let e0 = cs.e0;
    let [c1, c2, c3, c4] = cs.c;
    let [p1, p2, p3, p4] = cs.cp;
    let j = &cs.j;
    let (j12, j13, j14, j23, j24, j34) = (j.j12, j.j13, j.j14, j.j23, j.j24, j.j34);

    let e12 = c(p1 - j14, p2 - j24);
    let e = Matrix2::new(c(e0 + c4 + p3 - j34, 0.0), e12, e12.conj(), c(e0 + c4 - p3 + j34, 0.0));
    let h12 = c(-p1 - j14, -p2 - j24);
    let e_hat = Matrix2::new(c(e0 - c4 - p3 - j34, 0.0), h12, h12.conj(), c(e0 - c4 + p3 + j34, 0.0));
    let l = Matrix2::new(
        c(c3 - p4, j12),
        c(c1 + j13, c2 + j23),
        c(c1 - j13, -c2 + j23),
        c(-c3 - p4, -j12),
    );
    QMatrix { e, e_hat, l }
}

/// Result of a positivity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
    /// Ascending.
    pub eigenvalues: [f64; 4],
    /// Determinants of the leading `k×k` blocks, `k = 1..4`.
    pub leading_minors: [f64; 4],
    /// Smallest principal minor of each order, scaled by `‖Q‖^{1−k}`.
    pub min_principal_minor: [f64; 4],
    /// Verdict of the principal-minor criterion.
    pub minors_agree: bool,
    pub tolerance: f64,
}

fn det_sub(q: &Matrix4<Complex64>, idx: &[usize]) -> f64 {
    let n = idx.len();
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            m[(a, b)] = q[(i, j)];
        }
    }
    m.determinant().re
}

/// Ascending eigenvalues of a Hermitian 4×4 matrix.
pub fn hermitian_eigenvalues(q: &Matrix4<Complex64>) -> [f64; 4] {
    let ev = q.symmetric_eigenvalues();
    let mut v = [ev[0], ev[1], ev[2], ev[3]];
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Eigenvalue test with tolerance `10⁻¹⁰‖Q‖`, cross-checked against all
/// principal minors.
pub fn psd_check(q: &QMatrix) -> Result<PsdReport> {
    let m = q.full();
    let norm = m.norm();
    if (m - m.adjoint()).norm() > 1e-12 * norm.max(1e-300) {
        return Err(Error::Contract("Q is not Hermitian".into()));
    }
    let tolerance = 1e-10 * norm;
    let eigenvalues = hermitian_eigenvalues(&m);
    let min_eigenvalue = eigenvalues[0];
    let psd = min_eigenvalue >= -tolerance;

    let leading_minors = std::array::from_fn(|k| det_sub(&m, &(0..=k).collect::<Vec<_>>()));
    let mut min_principal_minor = [f64::INFINITY; 4];
    for mask in 1u32..16 {
        let idx: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        let k = idx.len();
        let scaled = det_sub(&m, &idx) / norm.max(1e-300).powi(k as i32 - 1);
        min_principal_minor[k - 1] = min_principal_minor[k - 1].min(scaled);
    }
    // minors of order k are sums of k-fold eigenvalue products
    let minors_agree = min_principal_minor
        .iter()
        .enumerate()
        .all(|(k, v)| *v >= -(k as f64 + 1.0) * 4.0 * tolerance)
        == psd;
    Ok(PsdReport {
        psd,
        min_eigenvalue,
        eigenvalues,
        leading_minors,
        min_principal_minor,
        minors_agree,
        tolerance,
    })
}

/// Which form of the second bound is reported as `b2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    /// `√(½(|c′|² + |J₍₄₎|²) + |L|²/8)`, the second-minor inequality.
    #[default]
    Proof,
    /// `√(½(|c|² + |J₍₄₎|²) + |L|²/8)` as printed in the theorem.
    Text,
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proof" => Ok(Self::Proof),
            "text" | "theorem-text" => Ok(Self::Text),
            _ => Err(Error::InvalidParameter(format!("unknown bound variant `{s}`"))),
        }
    }
}

/// All lower bounds on `E₀` for one charge set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub variant: BoundVariant,
    pub e0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub max_bound: f64,
    pub a: f64,
    pub l_sq: f64,
    pub w: f64,
    pub f: f64,
    pub fplus: f64,
    /// `E₀² − (c₄² + ½(|c|² + |Ĵ|²) + ½c′₄²)`.
    pub minor2_first: f64,
    /// `E₀² − (½(|c′|² + |J₍₄₎|²) + ¼(|c|² + |Ĵ|²) + ¼c′₄²)`.
    pub minor2_second: f64,
    /// Sum of third-order principal minors divided by 4.
    pub s: f64,
    pub det_closed_form: f64,
    /// `E₀ ≥ max bound`.
    pub verdict: bool,
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm_sq(a: &[f64; 3]) -> f64 {
    dot(a, a)
}

/// `ε_ijk aᵢ bⱼ cₖ`.
fn triple(a: &[f64; 3], b: &[f64; 3], cc: &[f64; 3]) -> f64 {
    dot(a, &cross(b, cc))
}

/// Closed-form `det Q`.
pub fn det_closed_form(cs: &ChargeSet) -> f64 {
    let d = derived(cs);
    let e0 = cs.e0;
    let (cv, cpv, jh, j4) = (&d.c, &d.cp, &d.j_hat, &d.j4);
    let (c4, cp4) = (d.c4, d.cp4);
    let mixed: [f64; 3] = std::array::from_fn(|i| c4 * cpv[i] - cp4 * cv[i]);
    (e0 * e0 - d.a).powi(2) + 8.0 * e0 * (cp4 * dot(cv, j4) - c4 * dot(cpv, j4))
        + 8.0 * e0 * triple(cv, cpv, jh)
        - 4.0 * norm_sq(&cross(cv, cpv))
        - 4.0 * norm_sq(&cross(cv, jh))
        - 4.0 * norm_sq(&cross(cpv, jh))
        - 4.0 * norm_sq(j4) * (c4 * c4 + cp4 * cp4)
        - 4.0 * norm_sq(&mixed)
        - 4.0 * (dot(j4, cpv).powi(2) + dot(j4, jh).powi(2) + dot(j4, cv).powi(2))
        - 8.0 * c4 * triple(cv, jh, j4)
        - 8.0 * cp4 * triple(cpv, jh, j4)
}

pub fn theorem_bounds(cs: &ChargeSet, variant: BoundVariant) -> BoundsReport {
    let d = derived(cs);
    let e0 = cs.e0;
    let (cv, cpv, jh, j4) = (&d.c, &d.cp, &d.j_hat, &d.j4);
    let (c4, cp4, a, l_sq) = (d.c4, d.cp4, d.a, d.l_sq);
    let mixed: [f64; 3] = std::array::from_fn(|i| c4 * cpv[i] - cp4 * cv[i]);
    let c_x_jh = cross(cv, jh);
    let w = (norm_sq(&mixed) + norm_sq(&c_x_jh)).sqrt();
    let f = -8.0 * SQRT_2 * w * a + 36.0 * norm_sq(&c_x_jh) + 4.0 * norm_sq(&cross(cv, cpv))
        + 36.0 * norm_sq(&mixed)
        + 4.0 * (dot(j4, cpv).powi(2) + dot(j4, jh).powi(2) + dot(j4, cv).powi(2))
        + 4.0 * norm_sq(&cross(cpv, jh))
        + 4.0 * norm_sq(j4) * (c4 * c4 + cp4 * cp4)
        + 8.0 * c4 * triple(cv, jh, j4)
        + 8.0 * cp4 * triple(cpv, jh, j4);
    let fplus = f.max(0.0);

    let b1 = (c4 * c4 + 0.25 * l_sq).sqrt();
    let b2_lead = match variant {
        BoundVariant::Proof => norm_sq(cpv),
        BoundVariant::Text => norm_sq(cv),
    };
    let b2 = (0.5 * (b2_lead + norm_sq(j4)) + 0.125 * l_sq).sqrt();
    let (ncp, nj4) = (norm_sq(cpv).sqrt(), norm_sq(j4).sqrt());
    let b3 = ((a + ncp * ncp + nj4 * nj4).sqrt() - ncp - nj4).max(0.0);
    let b4 = (a - 2.0 * SQRT_2 * w).max(0.0).sqrt();
    let b5 = (a - 4.0 * SQRT_2 * w + fplus.sqrt()).max(0.0).sqrt();
    let max_bound = [b1, b2, b3, b4, b5].into_iter().fold(0.0, f64::max);

    let minor2_first = e0 * e0 - (c4 * c4 + 0.5 * (norm_sq(cv) + norm_sq(jh)) + 0.5 * cp4 * cp4);
    let minor2_second =
        e0 * e0 - (0.5 * (norm_sq(cpv) + norm_sq(j4)) + 0.25 * (norm_sq(cv) + norm_sq(jh)) + 0.25 * cp4 * cp4);
    let s = e0 * (e0 * e0 - a) + 2.0 * cp4 * dot(cv, j4) + 2.0 * triple(cv, cpv, jh) - 2.0 * c4 * dot(cpv, j4);

    BoundsReport {
        variant,
        e0,
        b1,
        b2,
        b3,
        b4,
        b5,
        max_bound,
        a,
        l_sq,
        w,
        f,
        fplus,
        minor2_first,
        minor2_second,
        s,
        det_closed_form: det_closed_form(cs),
        verdict: e0 >= max_bound,
    }
}

/// Outcome of the rigidity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RigidityOutcome {
    /// `E₀ > tol` or `Q` not PSD.
    NotInRigidityDomain { reason: String },
    /// `E₀ ≤ tol`, `Q ⪰ 0`; `vanishes` reports whether every charge is
    /// within `tol_q`.
    Checked { frobenius: f64, vanishes: bool },
}

pub fn rigidity_check(cs: &ChargeSet, tol: f64, tol_q: f64) -> Result<RigidityOutcome> {
    if cs.e0 > tol {
        return Ok(RigidityOutcome::NotInRigidityDomain {
            reason: format!("E0 = {:e} exceeds {tol:e}", cs.e0),
        });
    }
    let q = assemble_q(cs);
    let psd = psd_check(&q)?;
    if !psd.psd {
        return Ok(RigidityOutcome::NotInRigidityDomain {
            reason: format!("Q is not PSD (min eigenvalue {:e})", psd.min_eigenvalue),
        });
    }
    let frobenius = q.frobenius_norm();
    let vanishes = frobenius <= tol_q && cs.to_array().iter().all(|v| v.abs() <= tol_q);
    Ok(RigidityOutcome::Checked { frobenius, vanishes })
}

/// Choice of the margin `δ` in `E₀ = −λ_min(Q̃) + δ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// `δ = 0` for even sample indices and `|N(0,1)|` for odd ones.
    #[default]
    Alternate,
    Zero,
    Positive,
}

/// Sampler settings. Momenta are `scale · N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub scale: f64,
    pub delta: DeltaMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            scale: 1.0,
            delta: DeltaMode::Alternate,
        }
    }
}

/// One admissible charge set with the margin used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdSample {
    pub index: usize,
    pub delta: f64,
    pub charges: ChargeSet,
}

fn draw_sample(seed: u64, index: usize, cfg: &SamplerConfig) -> PsdSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut v = [0.0; 15];
    for x in v[1..].iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = cfg.scale * z;
    }
    let mut cs = ChargeSet::from_array(v);
    let lmin = hermitian_eigenvalues(&assemble_q(&cs).full())[0];
    let extra: f64 = StandardNormal.sample(&mut rng);
    let delta = match cfg.delta {
        DeltaMode::Zero => 0.0,
        DeltaMode::Positive => cfg.scale * extra.abs(),
        DeltaMode::Alternate if index % 2 == 0 => 0.0,
        DeltaMode::Alternate => cfg.scale * extra.abs(),
    };
    cs.e0 = -lmin + delta;
    PsdSample {
        index,
        delta,
        charges: cs,
    }
}

/// `n` charge sets with `Q ⪰ 0`, deterministic in `(seed, n)`: sample `i`
/// uses stream `i` of a ChaCha8 generator seeded with `seed`.
pub fn sample_psd_charges(seed: u64, n: usize) -> Vec<PsdSample> {
    sample_psd_charges_with(seed, n, &SamplerConfig::default())
}

pub fn sample_psd_charges_with(seed: u64, n: usize, cfg: &SamplerConfig) -> Vec<PsdSample> {
    (0..n).into_par_iter().map(|i| draw_sample(seed, i, cfg)).collect()
}

/// Absolute tolerance of the property checks on sampled charge sets.
pub const PROPERTY_TOL: f64 = 1e-9;
/// Relative tolerance of the determinant comparison.
pub const DET_REL_TOL: f64 = 1e-8;

/// Theorem-level quantities for one sampled charge set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub index: usize,
    pub e0: f64,
    pub delta: f64,
    pub psd: bool,
    pub min_eigenvalue: f64,
    /// `E₀ − max(B₁..B₅)` with the proof form of `B₂`.
    pub bound_margin: f64,
    /// `E₀ − B₂` with the theorem-text form of `B₂`.
    pub text_b2_margin: f64,
    pub minor2_first: f64,
    pub minor2_second: f64,
    pub s: f64,
    /// `|det_eig − det_closed| / max(|det_eig|, 10⁻⁶‖Q‖⁴)`.
    pub det_rel_err: f64,
    /// `A − 2√2 W`.
    pub a_minus_2sqrt2_w: f64,
    pub frobenius: f64,
}

impl SampleCheck {
    pub fn passes(&self) -> bool {
        self.psd
            && self.bound_margin >= -PROPERTY_TOL
            && self.minor2_first >= -PROPERTY_TOL
            && self.minor2_second >= -PROPERTY_TOL
            && self.s >= -PROPERTY_TOL
            && self.det_rel_err <= DET_REL_TOL
    }
}

pub fn check_sample(sample: &PsdSample) -> Result<SampleCheck> {
    let cs = &sample.charges;
    let q = assemble_q(cs);
    let psd = psd_check(&q)?;
    let proof = theorem_bounds(cs, BoundVariant::Proof);
    let text = theorem_bounds(cs, BoundVariant::Text);
    let det_eig: f64 = psd.eigenvalues.iter().product();
    let frobenius = q.frobenius_norm();
    let denom = det_eig.abs().max(1e-6 * frobenius.powi(4));
    let det_rel_err = if denom == 0.0 {
        (det_eig - proof.det_closed_form).abs()
    } else {
        (det_eig - proof.det_closed_form).abs() / denom
    };
    Ok(SampleCheck {
        index: sample.index,
        e0: cs.e0,
        delta: sample.delta,
        psd: psd.psd,
        min_eigenvalue: psd.min_eigenvalue,
        bound_margin: cs.e0 - proof.max_bound,
        text_b2_margin: cs.e0 - text.b2,
        minor2_first: proof.minor2_first,
        minor2_second: proof.minor2_second,
        s: proof.s,
        det_rel_err,
        a_minus_2sqrt2_w: proof.a - 2.0 * SQRT_2 * proof.w,
        frobenius,
    })
}

/// Aggregate of [`SampleCheck`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub n: usize,
    pub passed: usize,
    pub failed_indices: Vec<usize>,
    pub min_bound_margin: f64,
    pub min_minor2_first: f64,
    pub min_minor2_second: f64,
    pub min_s: f64,
    pub max_det_rel_err: f64,
    pub max_boundary_min_eigenvalue: f64,
    /// Samples where the theorem-text `B₂` exceeds `E₀` by more than the
    /// tolerance.
    pub text_b2_violations: usize,
    pub min_text_b2_margin: f64,
    pub min_a_minus_2sqrt2_w: f64,
}

pub fn summarize(checks: &[SampleCheck]) -> PropertySummary {
    let min = |f: &dyn Fn(&SampleCheck) -> f64| checks.iter().map(f).fold(f64::INFINITY, f64::min);
    let failed_indices: Vec<usize> = checks.iter().filter(|c| !c.passes()).map(|c| c.index).collect();
    PropertySummary {
        n: checks.len(),
        passed: checks.len() - failed_indices.len(),
        failed_indices,
        min_bound_margin: min(&|c| c.bound_margin),
        min_minor2_first: min(&|c| c.minor2_first),
        min_minor2_second: min(&|c| c.minor2_second),
        min_s: min(&|c| c.s),
        max_det_rel_err: checks.iter().map(|c| c.det_rel_err).fold(0.0, f64::max),
        max_boundary_min_eigenvalue: checks
            .iter()
            .filter(|c| c.delta == 0.0)
            .map(|c| c.min_eigenvalue.abs())
            .fold(0.0, f64::max),
        text_b2_violations: checks.iter().filter(|c| c.text_b2_margin < -PROPERTY_TOL).count(),
        min_text_b2_margin: min(&|c| c.text_b2_margin),
        min_a_minus_2sqrt2_w: min(&|c| c.a_minus_2sqrt2_w),
    }
}

/// Which boundary integrand is used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityMode {
    /// Growing spinor profiles `u⁺, v⁺` against `ℰ₁` and `𝒫_{k1}`.
    #[default]
    Leading,
    /// Full spinor `Φ₀` in the bilinear boundary term.
    Exact,
}

impl std::str::FromStr for IdentityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading" => Ok(Self::Leading),
            "exact" => Ok(Self::Exact),
            _ => Err(Error::InvalidParameter(format!("unknown identity mode `{s}`"))),
        }
    }
}

/// Both sides of the boundary identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub mode: IdentityMode,
    pub lambda: KillingParams,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, 0 when both vanish.
    pub gap: f64,
    pub lhs_limit: RadialLimit,
    pub lhs_radial_values: Vec<(f64, f64)>,
    pub charges: ChargeSet,
}

fn boundary_integrand(
    model: &dyn InitialData,
    lambda: &KillingParams,
    p: &SlicePoint,
    mode: IdentityMode,
    deriv: DerivativeMode,
) -> Result<f64> {
    let k = model.constants();
    let kappa = k.kappa();
    let pm = momentum_aspect(model, p)?;
    match mode {
        IdentityMode::Leading => {
            let e1 = crate::initial_data::mass_aspect(model, p, deriv)?[0];
            let pr = profiles(lambda, p.theta, p.psi, p.phi);
            let (u, v) = (pr.u_plus, pr.v_plus);
            let grow = (kappa * p.r).exp();
            let uv = u.conj() * v;
            let vu = v.conj() * u;
            let energy = 0.5 * e1 * (u.norm_sqr() + v.norm_sqr());
            let momentum = pm[1][0] * (u.norm_sqr() - v.norm_sqr()) + (c(0.0, -1.0) * pm[2][0] * (uv - vu)).re
                + pm[3][0] * (uv + vu).re;
            Ok((energy + momentum) * grow)
        }
        IdentityMode::Exact => {
            let phi: SpinorValue = killing_spinor(lambda, p, &k);
            let a = model.a(p)?;
            let div = divergence_part(model, p, deriv)?[0];
            let mut total = 0.25 * div * phi.norm_sqr();
            for kk in 1..=4 {
                let i_gamma = gamma_complex(kk) * c(0.0, 1.0);
                let clifford = bilinear(&phi, &i_gamma, &phi).re;
                total += 0.25 * kappa * trace_correction(&a, kk) * clifford;
                let g0gk = gamma_complex(0) * gamma_complex(kk);
                total -= 0.5 * pm[kk - 1][0] * bilinear(&phi, &g0gk, &phi).re;
            }
            Ok(total)
        }
    }
}

/// Extrapolated boundary integral against `8π λ†Qλ` with `Q` from the
/// charges of the same model and quadrature.
pub fn boundary_identity(
    model: &dyn InitialData,
    lambda: &KillingParams,
    q: &QuadratureSpec,
    mode: IdentityMode,
) -> Result<IdentityReport> {
    let deriv = DerivativeMode::Auto;
    let charges = compute_charges(model, q, deriv)?;
    if charges.any_divergent() {
        let bad: Vec<&str> = charges
            .diagnostics
            .iter()
            .filter(|d| d.divergent)
            .map(|d| d.name.as_str())
            .collect();
        return Err(Error::Divergent(format!("charges {bad:?} diverge")));
    }
    let rhs = 8.0 * PI * assemble_q(&charges).quadratic_form(lambda);
    let k = model.constants();
    let f = |p: &SlicePoint| boundary_integrand(model, lambda, p, mode, deriv);
    let radii = match model.native_grid() {
        Some(g) => g.radii,
        None => q.radii.clone(),
    };
    let mut seq = Vec::with_capacity(radii.len());
    let mut scale = 0.0_f64;
    for &r in &radii {
        let (value, mass) = match model.native_grid() {
            Some(g) => {
                let grid = crate::geometry::SphereGrid::new(g.ntheta, g.npsi, g.nphi);
                let res = crate::geometry::integrate_on_grid(&f, r, &grid, &k)?;
                (res.value, res.abs_mass[0])
            }
            None => {
                let res = surface_integrate(&f, r, q, &k)?;
                (res.value, res.abs_mass[0])
            }
        };
        scale = scale.max(mass);
        seq.push((r, value));
    }
    let lhs_limit = radial_limit_with_floor(&seq, &k, q.rel_tol, q.rel_tol * scale)?;
    let lhs = lhs_limit.limit;
    let denom = lhs.abs().max(rhs.abs());
    let gap = if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom };
    Ok(IdentityReport {
        mode,
        lambda: *lambda,
        lhs,
        rhs,
        gap,
        lhs_limit,
        lhs_radial_values: seq,
        charges,
    })
}

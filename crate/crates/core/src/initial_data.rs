//! Perturbations `(a_ij, h_ij)` of the hyperbolic slice in the orthonormal
//! frame, the aspect fields `ℰᵢ` and `𝒫ₖᵢ`, decay checks and the sampled-grid
//! file format.
//!
//! The second fundamental form is carried as the same field `h` that appears
//! in the decay conditions. Traces are frame traces `Σᵢ (·)ᵢᵢ`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{frame_scale, spin_connection, ModelConstants, SlicePoint, SphereGrid};

/// Symmetric 4×4 array stored as its ten independent entries in the order
/// `(11, 12, 13, 14, 22, 23, 24, 33, 34, 44)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym4(pub [f64; 10]);

/// Index pairs in storage order.
pub const SYM4_ORDER: [(usize, usize); 10] = [
    (1, 1),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 2),
    (2, 3),
    (2, 4),
    (3, 3),
    (3, 4),
    (4, 4),
];

fn sym_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    match (i, j) {
        (1, j) => j - 1,
        (2, j) => j + 2,
        (3, j) => j + 4,
        (4, 4) => 9,
        _ => panic!("symmetric index ({i},{j}) out of range"),
    }
}

impl Sym4 {
    pub fn zero() -> Self {
        Self([0.0; 10])
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds from `f(i, j)` evaluated on `i ≤ j`, 1-based.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self(SYM4_ORDER.map(|(i, j)| f(i, j)))
    }

    /// Entry `(i, j)`, 1-based, either order.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[sym_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[sym_index(i, j)] = v;
    }

    pub fn trace(&self) -> f64 {
        (1..=4).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.map(|v| v * s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(std::array::from_fn(|n| self.0[n] + other.0[n]))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Resolved model configuration, `{"name": …, "params": {…}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default = "empty_params")]
    pub params: Value,
}

fn empty_params() -> Value {
    json!({})
}

/// Node counts and radii of a sampled model; charges are evaluated on
/// exactly these nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeGrid {
    pub ntheta: usize,
    pub npsi: usize,
    pub nphi: usize,
    pub radii: Vec<f64>,
}

/// An asymptotically AdS initial data set given by its frame components.
pub trait InitialData: Send + Sync {
    fn constants(&self) -> ModelConstants;
    /// Declared decay order `τ`.
    fn tau(&self) -> f64;
    fn a(&self, p: &SlicePoint) -> Result<Sym4>;
    fn h(&self, p: &SlicePoint) -> Result<Sym4>;
    /// Frame derivative `ĕ_axis(a_ij)`, `axis ∈ 1..=4`, when available in
    /// closed form.
    fn frame_derivative_a(&self, _p: &SlicePoint, _axis: usize) -> Result<Option<Sym4>> {
        Ok(None)
    }
    fn native_grid(&self) -> Option<NativeGrid> {
        None
    }
    fn config(&self) -> ModelConfig;
}

/// How frame derivatives of `a` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Closed form when the model provides it, central differences otherwise.
    Auto,
    Analytic,
    FiniteDifference { step: f64 },
}

impl Default for DerivativeMode {
    fn default() -> Self {
        DerivativeMode::Auto
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-4;

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate sigma must be > 2, got {sigma}"
        )));
    }
    Ok(())
}

/// Unperturbed AdS: `a = h = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdsExact {
    pub constants: ModelConstants,
}

impl InitialData for AdsExact {
    fn constants(&self) -> ModelConstants {
        self.constants
    }
    fn tau(&self) -> f64 {
        4.0
    }
    fn a(&self, _: &SlicePoint) -> Result<Sym4> {
        Ok(Sym4::zero())
    }
    fn h(&self, _: &SlicePoint) -> Result<Sym4> {
        Ok(Sym4::zero())
    }
    fn frame_derivative_a(&self, _: &SlicePoint, _: usize) -> Result<Option<Sym4>> {
        Ok(Some(Sym4::zero()))
    }
    fn config(&self) -> ModelConfig {
        ModelConfig {
            name: "ads_exact".into(),
            params: json!({ "kappa": self.constants.kappa() }),
        }
    }
}

/// `a_ij = m e^{−σκr} δ_ij`, `h = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialBump {
    pub m: f64,
    pub sigma: f64,
    pub constants: ModelConstants,
}

impl RadialBump {
    pub fn new(m: f64, sigma: f64, constants: ModelConstants) -> Result<Self> {
        check_sigma(sigma)?;
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!("m must be finite, got {m}")));
        }
        Ok(Self { m, sigma, constants })
    }

    fn f(&self, r: f64) -> f64 {
        self.m * (-self.sigma * self.constants.kappa() * r).exp()
    }
}

impl InitialData for RadialBump {
    fn constants(&self) -> ModelConstants {
        self.constants
    }
    fn tau(&self) -> f64 {
        self.sigma
    }
    fn a(&self, p: &SlicePoint) -> Result<Sym4> {
        Ok(Sym4::identity().scaled(self.f(p.r)))
    }
    fn h(&self, _: &SlicePoint) -> Result<Sym4> {
        Ok(Sym4::zero())
    }
    fn frame_derivative_a(&self, p: &SlicePoint, axis: usize) -> Result<Option<Sym4>> {
        match axis {
            1 => {
                let df = -self.sigma * self.constants.kappa() * self.f(p.r);
                Ok(Some(Sym4::identity().scaled(df)))
            }
            2..=4 => Ok(Some(Sym4::zero())),
            _ => Err(Error::InvalidIndex(axis)),
        }
    }
    fn config(&self) -> ModelConfig {
        ModelConfig {
            name: "radial_bump".into(),
            params: json!({ "m": self.m, "sigma": self.sigma, "kappa": self.constants.kappa() }),
        }
    }
}

/// Angular factor of [`OffdiagMomentum`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    One,
    SinTheta,
    CosTheta,
    SinPsi,
    CosPsi,
    CosPhi,
    SinPhi,
}

impl Profile {
    pub fn eval(&self, p: &SlicePoint) -> f64 {
        match self {
            Profile::One => 1.0,
            Profile::SinTheta => p.theta.sin(),
            Profile::CosTheta => p.theta.cos(),
            Profile::SinPsi => p.psi.sin(),
            Profile::CosPsi => p.psi.cos(),
            Profile::CosPhi => p.phi.cos(),
            Profile::SinPhi => p.phi.sin(),
        }
    }
}

/// `h_{1k} = h_{k1} = q e^{−σκr} W(θ, ψ, φ)` for one `k ∈ {2, 3, 4}`,
/// everything else zero.
#[derive(Clone, Debug, PartialEq)]
pub struct OffdiagMomentum {
    pub q: f64,
    pub axis: usize,
    pub sigma: f64,
    pub profile: Profile,
    pub constants: ModelConstants,
}

impl OffdiagMomentum {
    pub fn new(q: f64, axis: usize, sigma: f64, profile: Profile, constants: ModelConstants) -> Result<Self> {
        check_sigma(sigma)?;
        if !(2..=4).contains(&axis) {
            return Err(Error::InvalidParameter(format!("axis must be 2, 3 or 4, got {axis}")));
        }
        if !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be finite, got {q}")));
        }
        Ok(Self {
            q,
            axis,
            sigma,
            profile,
            constants,
        })
    }
}

impl InitialData for OffdiagMomentum {
    fn constants(&self) -> ModelConstants {
        self.constants
    }
    fn tau(&self) -> f64 {
        self.sigma
    }
    fn a(&self, _: &SlicePoint) -> Result<Sym4> {
        Ok(Sym4::zero())
    }
    fn h(&self, p: &SlicePoint) -> Result<Sym4> {
        let mut h = Sym4::zero();
        let v = self.q * (-self.sigma * self.constants.kappa() * p.r).exp() * self.profile.eval(p);
        h.set(1, self.axis, v);
        Ok(h)
    }
    fn frame_derivative_a(&self, _: &SlicePoint, _: usize) -> Result<Option<Sym4>> {
        Ok(Some(Sym4::zero()))
    }
    fn config(&self) -> ModelConfig {
        ModelConfig {
            name: "offdiag_momentum".into(),
            params: json!({
                "q": self.q,
                "axis": self.axis,
                "sigma": self.sigma,
                "profile": self.profile,
                "kappa": self.constants.kappa(),
            }),
        }
    }
}

/// Sum of several models sharing one `κ`.
pub struct Superposition {
    parts: Vec<Box<dyn InitialData>>,
    constants: ModelConstants,
}

impl Superposition {
    pub fn new(parts: Vec<Box<dyn InitialData>>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("sum needs at least one model".into()))?;
        let constants = first.constants();
        if parts.iter().any(|m| m.constants() != constants) {
            return Err(Error::InvalidParameter("summed models must share kappa".into()));
        }
        if parts.iter().any(|m| m.native_grid().is_some()) {
            return Err(Error::InvalidParameter("grid models cannot be summed".into()));
        }
        Ok(Self { parts, constants })
    }
}

impl InitialData for Superposition {
    fn constants(&self) -> ModelConstants {
        self.constants
    }
    fn tau(&self) -> f64 {
        self.parts.iter().map(|m| m.tau()).fold(f64::INFINITY, f64::min)
    }
    fn a(&self, p: &SlicePoint) -> Result<Sym4> {
        self.parts.iter().try_fold(Sym4::zero(), |acc, m| Ok(acc.add(&m.a(p)?)))
    }
    fn h(&self, p: &SlicePoint) -> Result<Sym4> {
        self.parts.iter().try_fold(Sym4::zero(), |acc, m| Ok(acc.add(&m.h(p)?)))
    }
    fn frame_derivative_a(&self, p: &SlicePoint, axis: usize) -> Result<Option<Sym4>> {
        let mut acc = Sym4::zero();
        for m in &self.parts {
            match m.frame_derivative_a(p, axis)? {
                Some(d) => acc = acc.add(&d),
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }
    fn config(&self) -> ModelConfig {
        let parts: Vec<ModelConfig> = self.parts.iter().map(|m| m.config()).collect();
        ModelConfig {
            name: "sum".into(),
            params: json!({ "models": parts }),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KappaOnly {
    #[serde(default = "default_kappa")]
    kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RadialBumpParams {
    m: f64,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default = "default_kappa")]
    kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OffdiagParams {
    q: f64,
    axis: usize,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default = "default_profile")]
    profile: Profile,
    #[serde(default = "default_kappa")]
    kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridParams {
    path: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SumParams {
    models: Vec<ModelConfig>,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    4.0
}
fn default_profile() -> Profile {
    Profile::SinTheta
}

fn params<T: for<'de> Deserialize<'de>>(name: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::InvalidParameter(format!("parameters of `{name}`: {e}")))
}

/// Builds a model from its configuration. Known names: `ads_exact`,
/// `radial_bump`, `offdiag_momentum`, `grid`, `sum`.
pub fn model_from_config(cfg: &ModelConfig) -> Result<Box<dyn InitialData>> {
    let p = &cfg.params;
    match cfg.name.as_str() {
        "ads_exact" => {
            let k: KappaOnly = params(&cfg.name, p)?;
            Ok(Box::new(AdsExact {
                constants: ModelConstants::new(k.kappa)?,
            }))
        }
        "radial_bump" => {
            let b: RadialBumpParams = params(&cfg.name, p)?;
            Ok(Box::new(RadialBump::new(b.m, b.sigma, ModelConstants::new(b.kappa)?)?))
        }
        "offdiag_momentum" => {
            let o: OffdiagParams = params(&cfg.name, p)?;
            Ok(Box::new(OffdiagMomentum::new(
                o.q,
                o.axis,
                o.sigma,
                o.profile,
                ModelConstants::new(o.kappa)?,
            )?))
        }
        "grid" => {
            let g: GridParams = params(&cfg.name, p)?;
            Ok(Box::new(GridModel::load(&g.path)?))
        }
        "sum" => {
            let s: SumParams = params(&cfg.name, p)?;
            let parts = s.models.iter().map(model_from_config).collect::<Result<Vec<_>>>()?;
            Ok(Box::new(Superposition::new(parts)?))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Parses `{"name": …, "params": {…}}` and builds the model.
pub fn model_from_json(text: &str) -> Result<Box<dyn InitialData>> {
    let cfg: ModelConfig = serde_json::from_str(text)?;
    model_from_config(&cfg)
}

fn fd_frame_derivative(model: &dyn InitialData, p: &SlicePoint, axis: usize, h: f64) -> Result<Sym4> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {h}")));
    }
    let coord = axis - 1;
    let c = p.coords()[coord];
    let crosses = match coord {
        0 => c - h <= 0.0,
        1 | 2 => c - h <= 0.0 || c + h >= std::f64::consts::PI,
        _ => false,
    };
    if crosses {
        return Err(Error::DegenerateCoordinate {
            r: p.r,
            theta: p.theta,
            psi: p.psi,
            what: "finite-difference stencil crosses a coordinate singularity",
        });
    }
    let plus = model.a(&p.shifted(coord, h))?;
    let minus = model.a(&p.shifted(coord, -h))?;
    let scale = 1.0 / (2.0 * h * frame_scale(axis, p, &model.constants())?);
    Ok(Sym4(std::array::from_fn(|n| (plus.0[n] - minus.0[n]) * scale)))
}

/// Frame derivative `ĕ_axis(a)` according to `mode`.
pub fn frame_derivative(model: &dyn InitialData, p: &SlicePoint, axis: usize, mode: DerivativeMode) -> Result<Sym4> {
    if !(1..=4).contains(&axis) {
        return Err(Error::InvalidIndex(axis));
    }
    match mode {
        DerivativeMode::FiniteDifference { step } => fd_frame_derivative(model, p, axis, step),
        DerivativeMode::Analytic => model.frame_derivative_a(p, axis)?.ok_or_else(|| {
            Error::InvalidParameter(format!("model `{}` has no analytic derivative", model.config().name))
        }),
        DerivativeMode::Auto => match model.frame_derivative_a(p, axis)? {
            Some(d) => Ok(d),
            None => fd_frame_derivative(model, p, axis, DEFAULT_FD_STEP),
        },
    }
}

/// `∇̆_k a_ij = ĕ_k(a_ij) − Σ_m ω_{mi k} a_mj − Σ_m ω_{mj k} a_im`, indexed
/// `[k − 1]`.
pub fn covariant_derivative_a(model: &dyn InitialData, p: &SlicePoint, mode: DerivativeMode) -> Result<[Sym4; 4]> {
    let w = spin_connection(p, &model.constants())?;
    let a = model.a(p)?;
    let mut out = [Sym4::zero(); 4];
    for k in 1..=4 {
        let d = frame_derivative(model, p, k, mode)?;
        out[k - 1] = Sym4::from_fn(|i, j| {
            let mut v = d.get(i, j);
            for m in 1..=4 {
                v -= w.get(m, i, k) * a.get(m, j) + w.get(m, j, k) * a.get(i, m);
            }
            v
        });
    }
    Ok(out)
}

/// `Σ_j ∇̆_j a_ij − ĕ_i(tr a)` for `i = 1..=4`.
pub fn divergence_part(model: &dyn InitialData, p: &SlicePoint, mode: DerivativeMode) -> Result<[f64; 4]> {
    let nabla = covariant_derivative_a(model, p, mode)?;
    Ok(std::array::from_fn(|n| {
        let i = n + 1;
        let div: f64 = (1..=4).map(|j| nabla[j - 1].get(i, j)).sum();
        div - nabla[i - 1].trace()
    }))
}

/// `a_{1i} − g_{1i} tr a` with `g = δ + a`.
pub fn trace_correction(a: &Sym4, i: usize) -> f64 {
    let g = if i == 1 { 1.0 } else { 0.0 } + a.get(1, i);
    a.get(1, i) - g * a.trace()
}

/// Mass aspect `ℰᵢ = Σ_j ∇̆_j a_ij − ĕ_i(tr a) − κ(a_{1i} − g_{1i} tr a)`.
pub fn mass_aspect(model: &dyn InitialData, p: &SlicePoint, mode: DerivativeMode) -> Result<[f64; 4]> {
    let div = divergence_part(model, p, mode)?;
    let a = model.a(p)?;
    let kappa = model.constants().kappa();
    Ok(std::array::from_fn(|n| div[n] - kappa * trace_correction(&a, n + 1)))
}

/// Momentum aspect `𝒫ₖᵢ = h_ki − g_ki tr h`, indexed `[k − 1][i − 1]`.
pub fn momentum_aspect(model: &dyn InitialData, p: &SlicePoint) -> Result<[[f64; 4]; 4]> {
    let a = model.a(p)?;
    let h = model.h(p)?;
    Ok(momentum_from(&a, &h))
}

pub(crate) fn momentum_from(a: &Sym4, h: &Sym4) -> [[f64; 4]; 4] {
    let tr = h.trace();
    std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            let g = if k == i { 1.0 } else { 0.0 } + a.get(k + 1, i + 1);
            h.get(k + 1, i + 1) - g * tr
        })
    })
}

/// Both aspects at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspectValues {
    pub mass: [f64; 4],
    pub momentum: [[f64; 4]; 4],
}

pub fn aspects(model: &dyn InitialData, p: &SlicePoint, mode: DerivativeMode) -> Result<AspectValues> {
    Ok(AspectValues {
        mass: mass_aspect(model, p, mode)?,
        momentum: momentum_aspect(model, p)?,
    })
}

/// Decay exponent estimates of `a`, `∇̆a` and `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub tau: f64,
    pub radii: Vec<f64>,
    pub a_norm: Vec<f64>,
    pub nabla_a_norm: Vec<f64>,
    pub h_norm: Vec<f64>,
    /// `None` for a field that vanishes on every sampled sphere.
    pub sigma_a: Option<f64>,
    pub sigma_nabla_a: Option<f64>,
    pub sigma_h: Option<f64>,
    pub pass: bool,
}

/// Smallest pairwise slope `−Δ log‖·‖ / (κ Δr)` over consecutive radii.
fn decay_exponent(radii: &[f64], norms: &[f64], kappa: f64) -> Option<f64> {
    if norms.iter().all(|n| *n == 0.0) {
        return None;
    }
    let mut worst = f64::INFINITY;
    for w in 0..radii.len() - 1 {
        let (n0, n1) = (norms[w], norms[w + 1]);
        let slope = if n0 == 0.0 && n1 == 0.0 {
            continue;
        } else if n0 == 0.0 || n1 == 0.0 {
            if n1 == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }
        } else {
            -(n1.ln() - n0.ln()) / (kappa * (radii[w + 1] - radii[w]))
        };
        worst = worst.min(slope);
    }
    Some(worst)
}

/// Estimates the decay rates of `a`, `∇̆a` and `h` from max-norms over
/// spheres at the given radii. Passes when every nonzero field decays at
/// least at rate `τ − 0.1` and `τ > 2`.
pub fn decay_validate(model: &dyn InitialData, radii: &[f64]) -> Result<DecayReport> {
    if radii.len() < 3 {
        return Err(Error::InvalidParameter("decay_validate needs at least 3 radii".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= 0.0 {
        return Err(Error::InvalidParameter("radii must be positive and increasing".into()));
    }
    let grid = match model.native_grid() {
        Some(g) => SphereGrid::new(g.ntheta, g.npsi, g.nphi),
        None => SphereGrid::new(10, 10, 10),
    };
    let mut a_norm = Vec::new();
    let mut nabla_a_norm = Vec::new();
    let mut h_norm = Vec::new();
    for &r in radii {
        let (mut na, mut nd, mut nh) = (0.0_f64, 0.0_f64, 0.0_f64);
        for &(theta, _) in &grid.theta {
            for &(psi, _) in &grid.psi {
                for &(phi, _) in &grid.phi {
                    let p = SlicePoint { r, theta, psi, phi };
                    na = na.max(model.a(&p)?.max_abs());
                    nh = nh.max(model.h(&p)?.max_abs());
                    for d in covariant_derivative_a(model, &p, DerivativeMode::Auto)? {
                        nd = nd.max(d.max_abs());
                    }
                }
            }
        }
        a_norm.push(na);
        nabla_a_norm.push(nd);
        h_norm.push(nh);
    }
    let kappa = model.constants().kappa();
    let tau = model.tau();
    let sigma_a = decay_exponent(radii, &a_norm, kappa);
    let sigma_nabla_a = decay_exponent(radii, &nabla_a_norm, kappa);
    let sigma_h = decay_exponent(radii, &h_norm, kappa);
    let pass = tau > 2.0
        && [sigma_a, sigma_nabla_a, sigma_h]
            .iter()
            .all(|s| s.is_none_or(|s| s >= tau - 0.1));
    Ok(DecayReport {
        tau,
        radii: radii.to_vec(),
        a_norm,
        nabla_a_norm,
        h_norm,
        sigma_a,
        sigma_nabla_a,
        sigma_h,
        pass,
    })
}

/// Lagrange differentiation matrix on arbitrary distinct nodes.
fn lagrange_diff_matrix(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let w: Vec<f64> = (0..n)
        .map(|j| 1.0 / (0..n).filter(|&m| m != j).map(|m| x[j] - x[m]).product::<f64>())
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = (w[j] / w[i]) / (x[i] - x[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

/// Fourier differentiation matrix on `2πk/n`, `n` even.
fn fourier_diff_matrix(n: usize) -> Vec<Vec<f64>> {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut d = vec![vec![0.0; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                let k = i as isize - j as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                *v = 0.5 * sign / (0.5 * k as f64 * h).tan();
            }
        }
    }
    d
}

/// Initial data sampled on the nodes of a quadrature grid ("AADS-ID v1").
///
/// Angular derivatives use spectral differentiation on the nodes. Radial
/// derivatives differentiate the polynomial interpolant of `e^{τκr} a`
/// through all listed radii, so data decaying at the declared rate `τ` is
/// handled without loss.
#[derive(Clone, Debug, PartialEq)]
pub struct GridModel {
    constants: ModelConstants,
    tau: f64,
    grid: NativeGrid,
    nodes: SphereGrid,
    values: Vec<[f64; 20]>,
    path: Option<PathBuf>,
    d_theta: Vec<Vec<f64>>,
    d_psi: Vec<Vec<f64>>,
    d_phi: Vec<Vec<f64>>,
    d_r: Vec<Vec<f64>>,
}

const GRID_MAGIC: &str = "aads-id 1";
const NODE_TOL: f64 = 1e-9;

impl GridModel {
    fn build(constants: ModelConstants, tau: f64, grid: NativeGrid, values: Vec<[f64; 20]>) -> Result<Self> {
        if grid.nphi % 2 != 0 || grid.nphi < 4 || grid.ntheta < 2 || grid.npsi < 2 {
            return Err(Error::InvalidParameter(
                "grid needs ntheta, npsi >= 2 and an even nphi >= 4".into(),
            ));
        }
        if grid.radii.is_empty() || grid.radii.iter().any(|r| !(*r > 0.0)) || grid.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("grid radii must be positive and increasing".into()));
        }
        let expected = grid.radii.len() * grid.ntheta * grid.npsi * grid.nphi;
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "grid has {} nodes, expected {expected}",
                values.len()
            )));
        }
        let nodes = SphereGrid::new(grid.ntheta, grid.npsi, grid.nphi);
        let th: Vec<f64> = nodes.theta.iter().map(|t| t.0).collect();
        let ps: Vec<f64> = nodes.psi.iter().map(|t| t.0).collect();
        Ok(Self {
            constants,
            tau,
            d_theta: lagrange_diff_matrix(&th),
            d_psi: lagrange_diff_matrix(&ps),
            d_phi: fourier_diff_matrix(grid.nphi),
            d_r: lagrange_diff_matrix(&grid.radii),
            grid,
            nodes,
            values,
            path: None,
        })
    }

    /// Samples `model` on the nodes of `grid`.
    pub fn sample(model: &dyn InitialData, grid: NativeGrid) -> Result<Self> {
        let nodes = SphereGrid::new(grid.ntheta, grid.npsi, grid.nphi);
        let mut values = Vec::with_capacity(grid.radii.len() * nodes.len());
        for &r in &grid.radii {
            for &(theta, _) in &nodes.theta {
                for &(psi, _) in &nodes.psi {
                    for &(phi, _) in &nodes.phi {
                        let p = SlicePoint { r, theta, psi, phi };
                        let (a, h) = (model.a(&p)?, model.h(&p)?);
                        let mut row = [0.0; 20];
                        row[..10].copy_from_slice(&a.0);
                        row[10..].copy_from_slice(&h.0);
                        values.push(row);
                    }
                }
            }
        }
        Self::build(model.constants(), model.tau(), grid, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut m = Self::parse(&text)?;
        m.path = Some(path.to_path_buf());
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::GridFormat {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };
        let (n, magic) = next("header")?;
        if magic != GRID_MAGIC {
            return Err(Error::GridFormat {
                line: n,
                msg: format!("expected `{GRID_MAGIC}`"),
            });
        }
        let field = |(n, l): (usize, &str), key: &str| -> Result<String> {
            l.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::GridFormat {
                    line: n,
                    msg: format!("expected `{key}=`"),
                })
        };
        let num = |n: usize, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::GridFormat {
                line: n,
                msg: format!("invalid number `{s}`"),
            })
        };
        let kl = next("kappa")?;
        let kappa = num(kl.0, &field(kl, "kappa")?)?;
        let tl = next("tau")?;
        let tau = num(tl.0, &field(tl, "tau")?)?;
        let gl = next("grid")?;
        let counts: Vec<usize> = field(gl, "grid")?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::GridFormat {
                line: gl.0,
                msg: "grid counts must be integers".into(),
            })?;
        let [nr, ntheta, npsi, nphi] = counts[..] else {
            return Err(Error::GridFormat {
                line: gl.0,
                msg: "expected four grid counts".into(),
            });
        };
        let rl = next("radii")?;
        let radii = field(rl, "radii")?
            .split_whitespace()
            .map(|s| num(rl.0, s))
            .collect::<Result<Vec<_>>>()?;
        if radii.len() != nr {
            return Err(Error::GridFormat {
                line: rl.0,
                msg: format!("{} radii listed, grid declares {nr}", radii.len()),
            });
        }
        let total = nr * ntheta * npsi * nphi;
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            let (n, l) = next("node values")?;
            let vals = l.split_whitespace().map(|s| num(n, s)).collect::<Result<Vec<_>>>()?;
            let row: [f64; 20] = vals.try_into().map_err(|v: Vec<f64>| Error::GridFormat {
                line: n,
                msg: format!("expected 20 values, found {}", v.len()),
            })?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::GridFormat {
                    line: n,
                    msg: "non-finite value".into(),
                });
            }
            values.push(row);
        }
        if let Some((n, _)) = next("end").ok() {
            return Err(Error::GridFormat {
                line: n,
                msg: "trailing data after the last node".into(),
            });
        }
        let constants = ModelConstants::new(kappa).map_err(|e| Error::GridFormat {
            line: kl.0,
            msg: e.to_string(),
        })?;
        let grid = NativeGrid {
            ntheta,
            npsi,
            nphi,
            radii,
        };
        Self::build(constants, tau, grid, values).map_err(|e| Error::GridFormat {
            line: gl.0,
            msg: e.to_string(),
        })
    }

    /// Serializes in the "AADS-ID v1" text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "{GRID_MAGIC}");
        let _ = writeln!(s, "kappa={}", self.constants.kappa());
        let _ = writeln!(s, "tau={}", self.tau);
        let _ = writeln!(s, "grid={} {} {} {}", g.radii.len(), g.ntheta, g.npsi, g.nphi);
        let radii: Vec<String> = g.radii.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "radii={}", radii.join(" "));
        for row in &self.values {
            let cols: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cols.join(" "));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    fn locate(&self, p: &SlicePoint) -> Result<[usize; 4]> {
        let off = || Error::OffGrid {
            r: p.r,
            theta: p.theta,
            psi: p.psi,
            phi: p.phi,
        };
        fn find(mut xs: impl Iterator<Item = f64>, x: f64, scale: f64) -> Option<usize> {
            xs.position(|v| (v - x).abs() <= NODE_TOL * scale)
        }
        let ir = find(self.grid.radii.iter().copied(), p.r, p.r.max(1.0)).ok_or_else(off)?;
        let it = find(self.nodes.theta.iter().map(|t| t.0), p.theta, 1.0).ok_or_else(off)?;
        let ip = find(self.nodes.psi.iter().map(|t| t.0), p.psi, 1.0).ok_or_else(off)?;
        let tau = 2.0 * std::f64::consts::PI;
        let step = tau / self.grid.nphi as f64;
        let k = p.phi.rem_euclid(tau) / step;
        let kr = k.round();
        if (k - kr).abs() * step > NODE_TOL {
            return Err(off());
        }
        let iphi = (kr as usize) % self.grid.nphi;
        Ok([ir, it, ip, iphi])
    }

    fn flat(&self, [ir, it, ip, iphi]: [usize; 4]) -> usize {
        ((ir * self.grid.ntheta + it) * self.grid.npsi + ip) * self.grid.nphi + iphi
    }

    fn row(&self, idx: [usize; 4]) -> &[f64; 20] {
        &self.values[self.flat(idx)]
    }

    fn a_at(&self, idx: [usize; 4]) -> Sym4 {
        let mut s = [0.0; 10];
        s.copy_from_slice(&self.row(idx)[..10]);
        Sym4(s)
    }

    /// Coordinate derivative `∂_{x^axis} a` at a node.
    fn coordinate_derivative(&self, idx: [usize; 4], axis: usize) -> Sym4 {
        let (d, slot) = match axis {
            1 => (&self.d_r, 0),
            2 => (&self.d_theta, 1),
            3 => (&self.d_psi, 2),
            _ => (&self.d_phi, 3),
        };
        let mut acc = Sym4::zero();
        for (m, coeff) in d[idx[slot]].iter().enumerate() {
            if *coeff == 0.0 {
                continue;
            }
            let mut j = idx;
            j[slot] = m;
            let mut v = self.a_at(j);
            if axis == 1 {
                v = v.scaled((self.tau * self.constants.kappa() * self.grid.radii[m]).exp());
            }
            acc = acc.add(&v.scaled(*coeff));
        }
        if axis == 1 {
            let r = self.grid.radii[idx[0]];
            let decay = (-self.tau * self.constants.kappa() * r).exp();
            acc = acc.scaled(decay).add(&self.a_at(idx).scaled(-self.tau * self.constants.kappa()));
        }
        acc
    }
}

impl InitialData for GridModel {
    fn constants(&self) -> ModelConstants {
        self.constants
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn a(&self, p: &SlicePoint) -> Result<Sym4> {
        Ok(self.a_at(self.locate(p)?))
    }
    fn h(&self, p: &SlicePoint) -> Result<Sym4> {
        let mut s = [0.0; 10];
        s.copy_from_slice(&self.row(self.locate(p)?)[10..]);
        Ok(Sym4(s))
    }
    fn frame_derivative_a(&self, p: &SlicePoint, axis: usize) -> Result<Option<Sym4>> {
        if !(1..=4).contains(&axis) {
            return Err(Error::InvalidIndex(axis));
        }
        let idx = self.locate(p)?;
        if axis == 1 && self.grid.radii.len() < 2 {
            return Err(Error::InvalidParameter("radial derivative needs at least 2 radii".into()));
        }
        let d = self.coordinate_derivative(idx, axis);
        Ok(Some(d.scaled(1.0 / frame_scale(axis, p, &self.constants)?)))
    }
    fn native_grid(&self) -> Option<NativeGrid> {
        Some(self.grid.clone())
    }
    fn config(&self) -> ModelConfig {
        ModelConfig {
            name: "grid".into(),
            params: json!({ "path": self.path }),
        }
    }
}

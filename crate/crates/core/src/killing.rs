//! The fifteen Killing vector fields `U_αβ` of AdS₅ restricted to the slice
//! `t = 0`, their frame components `U^{(γ)}`, and finite-difference checks of
//! the Killing equation and of the bracket relations.
//!
//! Coordinate components are ordered `(∂_t, ∂_r, ∂_θ, ∂_ψ, ∂_φ)`.
//!
//! Off the slice the boost-type fields mix with the time-like ones:
//! `U_{i0}(t) = cos(κt) S_i − sin(κt) T_i` and
//! `U_{i5}(t) = cos(κt) T_i + sin(κt) S_i`, where `S_i` and `T_i` are the
//! `t = 0` expressions of `U_{i0}` and `U_{i5}`. `U_{50}` and the rotations
//! are `t`-independent. This completion comes from the ambient rotation
//! generators with `y⁰ = cosh(κr) cos(κt)/κ`, `y⁵ = cosh(κr) sin(κt)/κ`,
//! `yⁱ = sinh(κr) nⁱ/κ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{frame_scale, time_scale, ModelConstants, SlicePoint, SpacetimePoint, POLE_EPS};

/// Label `(α, β)` of `U_αβ = −U_βα`, with `0 ≤ α ≠ β ≤ 5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KillingLabel {
    pub alpha: u8,
    pub beta: u8,
}

impl KillingLabel {
    /// The orientation in which each field is written out explicitly.
    pub const CANONICAL: [KillingLabel; 15] = [
        KillingLabel::raw(5, 0),
        KillingLabel::raw(1, 0),
        KillingLabel::raw(2, 0),
        KillingLabel::raw(3, 0),
        KillingLabel::raw(4, 0),
        KillingLabel::raw(1, 5),
        KillingLabel::raw(2, 5),
        KillingLabel::raw(3, 5),
        KillingLabel::raw(4, 5),
        KillingLabel::raw(1, 2),
        KillingLabel::raw(1, 3),
        KillingLabel::raw(1, 4),
        KillingLabel::raw(2, 3),
        KillingLabel::raw(2, 4),
        KillingLabel::raw(3, 4),
    ];

    const fn raw(alpha: u8, beta: u8) -> Self {
        Self { alpha, beta }
    }

    pub fn new(alpha: u8, beta: u8) -> Result<Self> {
        if alpha > 5 || beta > 5 || alpha == beta {
            return Err(Error::InvalidParameter(format!(
                "invalid Killing label ({alpha},{beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Canonical label and the sign relating it to `self`.
    pub fn canonical(&self) -> (KillingLabel, f64) {
        if Self::CANONICAL.contains(self) {
            (*self, 1.0)
        } else {
            (Self::raw(self.beta, self.alpha), -1.0)
        }
    }

    /// Position of the canonical label in [`Self::CANONICAL`].
    pub fn index(&self) -> usize {
        let (c, _) = self.canonical();
        Self::CANONICAL.iter().position(|l| *l == c).expect("canonical")
    }
}

impl fmt::Display for KillingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U{}{}", self.alpha, self.beta)
    }
}

impl FromStr for KillingLabel {
    type Err = Error;

    /// Accepts `"a,b"`, `"ab"` or `"Uab"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches(['U', 'u']);
        let digits: Vec<u8> = t
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidParameter(format!("cannot parse Killing label `{s}`")))?;
        match digits.as_slice() {
            [a, b] => Self::new(*a, *b),
            _ => Err(Error::InvalidParameter(format!("cannot parse Killing label `{s}`"))),
        }
    }
}

/// Frame components `U^{(γ)}`, `γ = 0..=4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameVector(pub [f64; 5]);

impl FrameVector {
    pub fn get(&self, gamma: usize) -> f64 {
        self.0[gamma]
    }
}

fn check_poles(c: KillingLabel, p: &SlicePoint) -> Result<()> {
    let needs_theta = matches!(
        (c.alpha, c.beta),
        (1, 0) | (2, 0) | (3, 0) | (1, 4) | (2, 4) | (3, 4)
    );
    let needs_psi = matches!(
        (c.alpha, c.beta),
        (1, 0) | (2, 0) | (1, 3) | (1, 4) | (2, 3) | (2, 4)
    );
    let needs_r = matches!(c.beta, 0) && c.alpha != 5;
    let bad = |what| Error::DegenerateCoordinate {
        r: p.r,
        theta: p.theta,
        psi: p.psi,
        what,
    };
    if needs_r && p.r <= 0.0 {
        return Err(bad("coth(kappa r) at r = 0"));
    }
    if needs_theta && p.theta.sin().abs() < POLE_EPS {
        return Err(bad("1/sin(theta)"));
    }
    if needs_psi && p.psi.sin().abs() < POLE_EPS {
        return Err(bad("1/sin(psi)"));
    }
    Ok(())
}

/// Slice expression of a canonical field; no pole checks.
fn slice_components(c: KillingLabel, p: &SlicePoint, k: &ModelConstants) -> [f64; 5] {
    let kappa = k.kappa();
    let kr = kappa * p.r;
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.psi.sin_cos();
    let (sf, cf) = p.phi.sin_cos();
    let coth = 1.0 / kr.tanh();
    let inv_k = 1.0 / kappa;
    let n = p.direction();
    match (c.alpha, c.beta) {
        (5, 0) => [inv_k, 0.0, 0.0, 0.0, 0.0],
        (1, 0) => [
            0.0,
            inv_k * st * sp * cf,
            coth * ct * sp * cf,
            coth * cp * cf / st,
            -coth * sf / (st * sp),
        ],
        (2, 0) => [
            0.0,
            inv_k * st * sp * sf,
            coth * ct * sp * sf,
            coth * cp * sf / st,
            coth * cf / (st * sp),
        ],
        (3, 0) => [0.0, inv_k * st * cp, coth * ct * cp, -coth * sp / st, 0.0],
        (4, 0) => [0.0, inv_k * ct, -coth * st, 0.0, 0.0],
        (i @ 1..=4, 5) => [inv_k * kr.tanh() * n[i as usize - 1], 0.0, 0.0, 0.0, 0.0],
        (1, 2) => [0.0, 0.0, 0.0, 0.0, 1.0],
        (1, 3) => [0.0, 0.0, 0.0, -cf, cp * sf / sp],
        (1, 4) => [0.0, 0.0, -sp * cf, -ct * cp * cf / st, ct * sf / (st * sp)],
        (2, 3) => [0.0, 0.0, 0.0, -sf, -cp * cf / sp],
        (2, 4) => [0.0, 0.0, -sp * sf, -ct * cp * sf / st, -ct * cf / (st * sp)],
        (3, 4) => [0.0, 0.0, -cp, ct * sp / st, 0.0],
        _ => unreachable!("non-canonical label {c}"),
    }
}

/// Coordinate components `(∂_t, ∂_r, ∂_θ, ∂_ψ, ∂_φ)` on the slice `t = 0`.
pub fn killing_vector_coord(label: KillingLabel, p: &SlicePoint, k: &ModelConstants) -> Result<[f64; 5]> {
    let (c, sign) = label.canonical();
    check_poles(c, p)?;
    Ok(slice_components(c, p, k).map(|v| sign * v))
}

/// Coordinate components at an arbitrary spacetime point.
pub fn killing_vector_spacetime(
    label: KillingLabel,
    x: &SpacetimePoint,
    k: &ModelConstants,
) -> Result<[f64; 5]> {
    let (c, sign) = label.canonical();
    let p = &x.slice;
    check_poles(c, p)?;
    let (s, co) = (k.kappa() * x.t).sin_cos();
    let v = match (c.alpha, c.beta) {
        (i @ 1..=4, 0) => {
            let spatial = slice_components(c, p, k);
            let timelike = slice_components(KillingLabel::raw(i, 5), p, k);
            std::array::from_fn(|m| co * spatial[m] - s * timelike[m])
        }
        (i @ 1..=4, 5) => {
            let timelike = slice_components(c, p, k);
            let spatial = slice_components(KillingLabel::raw(i, 0), p, k);
            std::array::from_fn(|m| co * timelike[m] + s * spatial[m])
        }
        _ => slice_components(c, p, k),
    };
    Ok(v.map(|x| sign * x))
}

/// Frame components `U^{(γ)}` with `∂_t = cosh(κr) ĕ₀` and the spatial
/// factors of [`frame_scale`].
pub fn killing_vector_frame(label: KillingLabel, p: &SlicePoint, k: &ModelConstants) -> Result<FrameVector> {
    let v = killing_vector_coord(label, p, k)?;
    let mut out = [0.0; 5];
    out[0] = v[0] * time_scale(p, k);
    for axis in 1..=4 {
        if v[axis] != 0.0 {
            out[axis] = v[axis] * frame_scale(axis, p, k)?;
        }
    }
    Ok(FrameVector(out))
}

/// Diagonal of the AdS₅ metric
/// `−cosh²(κr) dt² + dr² + (sinh²(κr)/κ²)(dθ² + sin²θ(dψ² + sin²ψ dφ²))`.
pub fn ads_metric_diag(x: &[f64; 5], k: &ModelConstants) -> [f64; 5] {
    let kr = k.kappa() * x[1];
    let s2 = (kr.sinh() / k.kappa()).powi(2);
    let st2 = x[2].sin().powi(2);
    [
        -kr.cosh().powi(2),
        1.0,
        s2,
        s2 * st2,
        s2 * st2 * x[3].sin().powi(2),
    ]
}

/// Largest component of `L_U g` for the AdS₅ metric, with all partial
/// derivatives by central differences of step `h`.
pub fn killing_residual(label: KillingLabel, x: &SpacetimePoint, h: f64, k: &ModelConstants) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {h}")));
    }
    let p = &x.slice;
    if p.r - h <= 0.0
        || p.theta - h <= 0.0
        || p.theta + h >= std::f64::consts::PI
        || p.psi - h <= 0.0
        || p.psi + h >= std::f64::consts::PI
    {
        return Err(Error::DegenerateCoordinate {
            r: p.r,
            theta: p.theta,
            psi: p.psi,
            what: "finite-difference stencil reaches a coordinate singularity",
        });
    }
    let c = x.coords();
    let u = killing_vector_spacetime(label, x, k)?;
    let g = ads_metric_diag(&c, k);
    // du[rho][mu] = ∂_rho U^mu, dg[rho][mu] = ∂_rho g_mumu
    let mut du = [[0.0; 5]; 5];
    let mut dg = [[0.0; 5]; 5];
    for rho in 0..5 {
        let mut plus = c;
        let mut minus = c;
        plus[rho] += h;
        minus[rho] -= h;
        let up = killing_vector_spacetime(label, &SpacetimePoint::from_coords(plus), k)?;
        let um = killing_vector_spacetime(label, &SpacetimePoint::from_coords(minus), k)?;
        let gp = ads_metric_diag(&plus, k);
        let gm = ads_metric_diag(&minus, k);
        for mu in 0..5 {
            du[rho][mu] = (up[mu] - um[mu]) / (2.0 * h);
            dg[rho][mu] = (gp[mu] - gm[mu]) / (2.0 * h);
        }
    }
    let mut worst = 0.0_f64;
    for mu in 0..5 {
        for nu in mu..5 {
            let mut lie = g[nu] * du[mu][nu] + g[mu] * du[nu][mu];
            if mu == nu {
                lie += (0..5).map(|rho| u[rho] * dg[rho][mu]).sum::<f64>();
            }
            worst = worst.max(lie.abs());
        }
    }
    Ok(worst)
}

/// Frame component `U^{(γ)}` divided by `e^{κr}`.
pub fn growth_ratio(label: KillingLabel, gamma: usize, p: &SlicePoint, k: &ModelConstants) -> Result<f64> {
    Ok(killing_vector_frame(label, p, k)?.get(gamma) * (-k.kappa() * p.r).exp())
}

/// Lie bracket `[U_a, U_b]` by central differences, in coordinate components.
pub fn bracket(a: KillingLabel, b: KillingLabel, x: &SpacetimePoint, h: f64, k: &ModelConstants) -> Result<[f64; 5]> {
    let c = x.coords();
    let ua = killing_vector_spacetime(a, x, k)?;
    let ub = killing_vector_spacetime(b, x, k)?;
    let mut out = [0.0; 5];
    for nu in 0..5 {
        let mut plus = c;
        let mut minus = c;
        plus[nu] += h;
        minus[nu] -= h;
        let (pp, mm) = (SpacetimePoint::from_coords(plus), SpacetimePoint::from_coords(minus));
        let dua = killing_vector_spacetime(a, &pp, k)?
            .iter()
            .zip(killing_vector_spacetime(a, &mm, k)?)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect::<Vec<_>>();
        let dub = killing_vector_spacetime(b, &pp, k)?
            .iter()
            .zip(killing_vector_spacetime(b, &mm, k)?)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect::<Vec<_>>();
        for mu in 0..5 {
            out[mu] += ua[nu] * dub[mu] - ub[nu] * dua[mu];
        }
    }
    Ok(out)
}

/// Least-squares expansion of a bracket in the fifteen canonical fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketFit {
    /// Coefficients in the order of [`KillingLabel::CANONICAL`].
    pub coefficients: Vec<f64>,
    /// Largest absolute fit residual over all points and components.
    pub residual: f64,
}

/// Fits `[U_a, U_b]` sampled at `points` as a combination of the fifteen
/// fields.
pub fn bracket_coefficients(
    a: KillingLabel,
    b: KillingLabel,
    points: &[SpacetimePoint],
    h: f64,
    k: &ModelConstants,
) -> Result<BracketFit> {
    let rows = points.len() * 5;
    let mut basis = DMatrix::<f64>::zeros(rows, 15);
    let mut target = DVector::<f64>::zeros(rows);
    for (i, x) in points.iter().enumerate() {
        let br = bracket(a, b, x, h, k)?;
        for mu in 0..5 {
            target[5 * i + mu] = br[mu];
        }
        for (j, l) in KillingLabel::CANONICAL.iter().enumerate() {
            let v = killing_vector_spacetime(*l, x, k)?;
            for mu in 0..5 {
                basis[(5 * i + mu, j)] = v[mu];
            }
        }
    }
    let svd = basis.clone().svd(true, true);
    let coeffs = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::Contract(format!("least squares failed: {e}")))?;
    let fit = &basis * &coeffs - &target;
    Ok(BracketFit {
        coefficients: coeffs.iter().copied().collect(),
        residual: fit.amax(),
    })
}

/// Residuals of one field at one sampled point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingSample {
    pub label: KillingLabel,
    pub point: SpacetimePoint,
    pub residual_h: f64,
    pub residual_half_h: f64,
    pub ratio: Option<f64>,
}

/// Seeded random interior spacetime points: `κt ∈ [−1, 1]`,
/// `κr ∈ [0.3, 2]`, `θ, ψ ∈ [0.3, π − 0.3]`, `φ ∈ [0, 2π)`.
pub fn sample_points(seed: u64, n: usize, k: &ModelConstants) -> Vec<SpacetimePoint> {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.random_range(-1.0..1.0) / k.kappa();
            let slice = SlicePoint {
                r: rng.random_range(0.3..2.0) / k.kappa(),
                theta: rng.random_range(0.3..PI - 0.3),
                psi: rng.random_range(0.3..PI - 0.3),
                phi: rng.random_range(0.0..2.0 * PI),
            };
            SpacetimePoint::new(t, slice)
        })
        .collect()
}

/// Killing residuals at steps `h` and `h/2` for each label at each point.
pub fn residual_samples(
    labels: &[KillingLabel],
    points: &[SpacetimePoint],
    h: f64,
    k: &ModelConstants,
) -> Result<Vec<KillingSample>> {
    let mut out = Vec::with_capacity(labels.len() * points.len());
    for label in labels {
        for x in points {
            let residual_h = killing_residual(*label, x, h, k)?;
            let residual_half_h = killing_residual(*label, x, 0.5 * h, k)?;
            let ratio = (residual_half_h > 0.0).then(|| residual_h / residual_half_h);
            out.push(KillingSample {
                label: *label,
                point: *x,
                residual_h,
                residual_half_h,
                ratio,
            });
        }
    }
    Ok(out)
}

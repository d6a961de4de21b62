//! Geometry of the hyperbolic slice `dr² + (sinh²(κr)/κ²) dσ²_{S³}` of AdS₅.
//!
//! Frames are the orthonormal `ĕ₁ = ∂_r`, `ĕ₂ = (κ/sinh κr) ∂_θ`,
//! `ĕ₃ = (κ/(sinh κr sin θ)) ∂_ψ`, `ĕ₄ = (κ/(sinh κr sin θ sin ψ)) ∂_φ` and,
//! on the spacetime, `ĕ₀ = (1/cosh κr) ∂_t`. Surface integrals over the
//! spheres `S_r` use a Gauss–Legendre rule in `θ` and `ψ` and a uniform
//! periodic rule in `φ`.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angles closer than this to a coordinate pole are treated as degenerate.
pub const POLE_EPS: f64 = 1e-12;

/// A point `(r, θ, ψ, φ)` on the hyperbolic slice. `φ` is periodic and may
/// be any finite real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub r: f64,
    pub theta: f64,
    pub psi: f64,
    pub phi: f64,
}

impl SlicePoint {
    pub fn new(r: f64, theta: f64, psi: f64, phi: f64) -> Result<Self> {
        let p = Self { r, theta, psi, phi };
        if ![r, theta, psi, phi].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinates {p:?}")));
        }
        if r < 0.0 || !(0.0..=PI).contains(&theta) || !(0.0..=PI).contains(&psi) {
            return Err(Error::Domain(format!("coordinates out of range {p:?}")));
        }
        Ok(p)
    }

    /// Same point with one coordinate (0 = r, 1 = θ, 2 = ψ, 3 = φ) shifted.
    /// No range check; used by finite differences.
    pub fn shifted(&self, coord: usize, h: f64) -> Self {
        let mut p = *self;
        match coord {
            0 => p.r += h,
            1 => p.theta += h,
            2 => p.psi += h,
            3 => p.phi += h,
            _ => panic!("coordinate index {coord} out of range"),
        }
        p
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.r, self.theta, self.psi, self.phi]
    }

    fn degenerate(&self, what: &'static str) -> Error {
        Error::DegenerateCoordinate {
            r: self.r,
            theta: self.theta,
            psi: self.psi,
            what,
        }
    }

    pub(crate) fn require_off_poles(&self) -> Result<()> {
        if self.r <= 0.0 {
            return Err(self.degenerate("r = 0"));
        }
        if self.theta.sin().abs() < POLE_EPS {
            return Err(self.degenerate("sin(theta) = 0"));
        }
        if self.psi.sin().abs() < POLE_EPS {
            return Err(self.degenerate("sin(psi) = 0"));
        }
        Ok(())
    }

    /// Unit vector of the point on S³ ⊂ ℝ⁴ (the direction cosines `nᵢ`).
    pub fn direction(&self) -> [f64; 4] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.psi.sin_cos();
        let (sf, cf) = self.phi.sin_cos();
        [st * sp * cf, st * sp * sf, st * cp, ct]
    }
}

/// A point `(t, r, θ, ψ, φ)` of the AdS spacetime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub slice: SlicePoint,
}

impl SpacetimePoint {
    pub fn new(t: f64, slice: SlicePoint) -> Self {
        Self { t, slice }
    }

    pub fn coords(&self) -> [f64; 5] {
        let [r, th, ps, ph] = self.slice.coords();
        [self.t, r, th, ps, ph]
    }

    pub fn from_coords(c: [f64; 5]) -> Self {
        Self {
            t: c[0],
            slice: SlicePoint {
                r: c[1],
                theta: c[2],
                psi: c[3],
                phi: c[4],
            },
        }
    }
}

/// Curvature scale `κ > 0`; the cosmological constant is `Λ = −6κ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    kappa: f64,
}

impl ModelConstants {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn cosmological_constant(&self) -> f64 {
        -6.0 * self.kappa * self.kappa
    }

    /// Warp factor `sinh(κr)/κ` of the round spheres.
    pub fn warp(&self, r: f64) -> f64 {
        (self.kappa * r).sinh() / self.kappa
    }
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

/// Factor `f` with `∂_{x^axis} = f ĕ_axis` for `axis ∈ 1..=4`.
pub fn frame_scale(axis: usize, p: &SlicePoint, k: &ModelConstants) -> Result<f64> {
    let s = k.warp(p.r);
    match axis {
        1 => Ok(1.0),
        2 => Ok(s),
        3 => {
            let st = p.theta.sin();
            if st.abs() < POLE_EPS {
                return Err(p.degenerate("sin(theta) = 0"));
            }
            Ok(s * st)
        }
        4 => {
            let (st, sp) = (p.theta.sin(), p.psi.sin());
            if st.abs() < POLE_EPS || sp.abs() < POLE_EPS {
                return Err(p.degenerate("sin(theta) sin(psi) = 0"));
            }
            Ok(s * st * sp)
        }
        _ => Err(Error::InvalidIndex(axis)),
    }
}

/// `∂_t = cosh(κr) ĕ₀`.
pub fn time_scale(p: &SlicePoint, k: &ModelConstants) -> f64 {
    (k.kappa() * p.r).cosh()
}

/// Unchecked frame factors `[1, s, s sin θ, s sin θ sin ψ]` (the diagonal
/// coframe `ĕ^a = E_a dx^a`).
pub(crate) fn coframe_diag(p: &SlicePoint, k: &ModelConstants) -> [f64; 4] {
    let s = k.warp(p.r);
    let st = p.theta.sin();
    [1.0, s, s * st, s * st * p.psi.sin()]
}

/// Density of `ĕ²∧ĕ³∧ĕ⁴` against `dθ dψ dφ`: `(sinh κr/κ)³ sin²θ sin ψ`.
pub fn sphere_measure_density(p: &SlicePoint, k: &ModelConstants) -> Result<f64> {
    if !(p.r > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be > 0, got {}", p.r)));
    }
    let s = k.warp(p.r);
    Ok(s.powi(3) * p.theta.sin().powi(2) * p.psi.sin())
}

/// Connection coefficients `ω_{ab c} = ⟨ĕ_a, ∇̆_{ĕ_c} ĕ_b⟩`, indices `1..=4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionCoefficients {
    omega: [[[f64; 4]; 4]; 4],
}

impl ConnectionCoefficients {
    pub fn zero() -> Self {
        Self {
            omega: [[[0.0; 4]; 4]; 4],
        }
    }

    /// `ω_{ab c}` for `a, b, c ∈ 1..=4`.
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.omega[a - 1][b - 1][c - 1]
    }

    /// Sets `ω_{ab c} = v` and `ω_{ba c} = −v`.
    fn set_pair(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.omega[a - 1][b - 1][c - 1] = v;
        self.omega[b - 1][a - 1][c - 1] = -v;
    }

    /// `ω^a_b` as a coordinate one-form: component along `dx^μ`.
    fn one_form(&self, a: usize, b: usize, mu: usize, coframe: &[f64; 4]) -> f64 {
        self.get(a, b, mu + 1) * coframe[mu]
    }
}

/// Closed-form Levi-Civita connection of the hyperbolic slice.
///
/// Nonzero entries (up to antisymmetry in the first pair):
/// `ω_{a1 a} = κ coth κr` for `a = 2, 3, 4`,
/// `ω_{32 3} = ω_{42 4} = cot θ / s` and `ω_{43 4} = cot ψ / (s sin θ)` with
/// `s = sinh κr / κ`.
pub fn spin_connection(p: &SlicePoint, k: &ModelConstants) -> Result<ConnectionCoefficients> {
    p.require_off_poles()?;
    let kappa = k.kappa();
    let s = k.warp(p.r);
    let radial = kappa / (kappa * p.r).tanh();
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.psi.sin_cos();
    let mut w = ConnectionCoefficients::zero();
    for a in 2..=4 {
        w.set_pair(a, 1, a, radial);
    }
    w.set_pair(3, 2, 3, ct / (st * s));
    w.set_pair(4, 2, 4, ct / (st * s));
    w.set_pair(4, 3, 4, cp / (sp * s * st));
    Ok(w)
}

/// Largest component of the first structure equation
/// `dĕ^a + ω^a_b ∧ ĕ^b` with `dĕ^a` taken by central differences of step `h`.
pub fn torsion_residual(p: &SlicePoint, k: &ModelConstants, h: f64) -> Result<f64> {
    let w = spin_connection(p, k)?;
    let e = coframe_diag(p, k);
    // d(E_a dx^a) = ∂_μ E_a dx^μ ∧ dx^a
    let mut de = [[0.0; 4]; 4];
    for mu in 0..4 {
        let plus = coframe_diag(&p.shifted(mu, h), k);
        let minus = coframe_diag(&p.shifted(mu, -h), k);
        for a in 0..4 {
            de[a][mu] = (plus[a] - minus[a]) / (2.0 * h);
        }
    }
    let mut worst = 0.0_f64;
    for a in 0..4 {
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                // (dĕ^a)_{μν}
                let mut comp = 0.0;
                if nu == a {
                    comp += de[a][mu];
                }
                if mu == a {
                    comp -= de[a][nu];
                }
                // (ω^a_b ∧ ĕ^b)_{μν} = ω^a_b(∂_μ) E_b δ^b_ν − ω^a_b(∂_ν) E_b δ^b_μ
                comp += w.one_form(a + 1, nu + 1, mu, &e) * e[nu];
                comp -= w.one_form(a + 1, mu + 1, nu, &e) * e[mu];
                worst = worst.max(comp.abs());
            }
        }
    }
    Ok(worst)
}

/// Largest violation of metric compatibility, `|ω_{ab c} + ω_{ba c}|`.
pub fn compatibility_residual(w: &ConnectionCoefficients) -> f64 {
    let mut worst = 0.0_f64;
    for a in 1..=4 {
        for b in 1..=4 {
            for c in 1..=4 {
                worst = worst.max((w.get(a, b, c) + w.get(b, a, c)).abs());
            }
        }
    }
    worst
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Node counts, radii and tolerance for sphere integrals and radial limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub ntheta: usize,
    pub npsi: usize,
    pub nphi: usize,
    /// Radii in units of `1/κ` are *not* implied: these are coordinate radii.
    pub radii: Vec<f64>,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            ntheta: 24,
            npsi: 24,
            nphi: 24,
            radii: vec![4.0, 5.0, 6.0, 7.0],
            rel_tol: 1e-8,
        }
    }
}

impl QuadratureSpec {
    /// Default node counts with the default radii rescaled to `κr ∈ {4,5,6,7}`.
    pub fn for_constants(k: &ModelConstants) -> Self {
        let mut q = Self::default();
        q.radii = q.radii.iter().map(|r| r / k.kappa()).collect();
        q
    }

    pub fn validate(&self) -> Result<()> {
        if self.ntheta < 4 || self.npsi < 4 {
            return Err(Error::InvalidParameter(
                "ntheta and npsi must be at least 4".into(),
            ));
        }
        if self.nphi < 4 || self.nphi % 2 != 0 {
            return Err(Error::InvalidParameter(
                "nphi must be even and at least 4".into(),
            ));
        }
        if self.radii.len() < 3 {
            return Err(Error::InvalidParameter("need at least 3 radii".into()));
        }
        if self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
            || self.radii.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be > 0".into()));
        }
        Ok(())
    }

    /// All node counts doubled.
    pub fn refined(&self) -> Self {
        Self {
            ntheta: self.ntheta * 2,
            npsi: self.npsi * 2,
            nphi: self.nphi * 2,
            ..self.clone()
        }
    }
}

/// Product grid on S³: Gauss–Legendre in `θ`, `ψ` mapped to `(0, π)`,
/// uniform `φ_k = 2πk/N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    pub theta: Vec<(f64, f64)>,
    pub psi: Vec<(f64, f64)>,
    pub phi: Vec<(f64, f64)>,
}

impl SphereGrid {
    pub fn new(ntheta: usize, npsi: usize, nphi: usize) -> Self {
        let mapped = |n: usize| {
            let (x, w) = gauss_legendre(n);
            x.iter()
                .zip(w.iter())
                .map(|(x, w)| (0.5 * PI * (x + 1.0), 0.5 * PI * w))
                .collect::<Vec<_>>()
        };
        let phi = (0..nphi)
            .map(|k| (2.0 * PI * k as f64 / nphi as f64, 2.0 * PI / nphi as f64))
            .collect();
        Self {
            theta: mapped(ntheta),
            psi: mapped(npsi),
            phi,
        }
    }

    pub fn from_spec(q: &QuadratureSpec) -> Self {
        Self::new(q.ntheta, q.npsi, q.nphi)
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.psi.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values that can be accumulated by a quadrature rule.
pub trait QuadValue: Copy + Send + Sync {
    fn zero() -> Self;
    fn len() -> usize;
    fn add_scaled(&mut self, other: &Self, w: f64);
    /// Magnitude of component `i`.
    fn component_abs(&self, i: usize) -> f64;
    /// `|self_i − other_i|`.
    fn component_diff(&self, other: &Self, i: usize) -> f64;
    fn all_finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn len() -> usize {
        1
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn component_abs(&self, _: usize) -> f64 {
        self.abs()
    }
    fn component_diff(&self, other: &Self, _: usize) -> f64 {
        (self - other).abs()
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn len() -> usize {
        1
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other.mul(w);
    }
    fn component_abs(&self, _: usize) -> f64 {
        self.norm()
    }
    fn component_diff(&self, other: &Self, _: usize) -> f64 {
        (self - other).norm()
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl<const N: usize> QuadValue for [f64; N] {
    fn zero() -> Self {
        [0.0; N]
    }
    fn len() -> usize {
        N
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b * w;
        }
    }
    fn component_abs(&self, i: usize) -> f64 {
        self[i].abs()
    }
    fn component_diff(&self, other: &Self, i: usize) -> f64 {
        (self[i] - other[i]).abs()
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Fixed-size vector of complex values usable as a [`QuadValue`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexArray<const N: usize>(pub [Complex64; N]);

impl<const N: usize> Default for ComplexArray<N> {
    fn default() -> Self {
        ComplexArray([Complex64::default(); N])
    }
}

impl<const N: usize> QuadValue for ComplexArray<N> {
    fn zero() -> Self {
        Self::default()
    }
    fn len() -> usize {
        N
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b * w;
        }
    }
    fn component_abs(&self, i: usize) -> f64 {
        self.0[i].norm()
    }
    fn component_diff(&self, other: &Self, i: usize) -> f64 {
        (self.0[i] - other.0[i]).norm()
    }
    fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// One quadrature evaluation on a single grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridIntegral<V> {
    pub value: V,
    /// `∫ |f_i| ω̆` per component; the scale for relative comparisons.
    pub abs_mass: Vec<f64>,
}

/// A surface integral with its refinement check.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceIntegral<V> {
    pub value: V,
    pub abs_mass: Vec<f64>,
    /// Per-component relative change under doubling all node counts.
    pub refinement_change: Vec<f64>,
    /// Per-component flag: refinement change below `rel_tol`.
    pub converged: Vec<bool>,
}

impl<V: QuadValue> SurfaceIntegral<V> {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

/// Integrates `f · ω̆` over `S_r` on one grid. Rows of constant `θ` are
/// evaluated in parallel and summed in index order.
pub fn integrate_on_grid<V, F>(
    f: &F,
    r: f64,
    grid: &SphereGrid,
    k: &ModelConstants,
) -> Result<GridIntegral<V>>
where
    V: QuadValue,
    F: Fn(&SlicePoint) -> Result<V> + Sync,
{
    if !(r > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be > 0, got {r}")));
    }
    let n = V::len();
    let rows: Vec<Result<(V, Vec<f64>)>> = grid
        .theta
        .par_iter()
        .map(|&(theta, wt)| {
            let mut acc = V::zero();
            let mut mass = vec![0.0; n];
            for &(psi, wp) in &grid.psi {
                for &(phi, wf) in &grid.phi {
                    let p = SlicePoint { r, theta, psi, phi };
                    let v = f(&p)?;
                    if !v.all_finite() {
                        return Err(Error::NonFinite { r, theta, psi, phi });
                    }
                    let w = wt * wp * wf * sphere_measure_density(&p, k)?;
                    acc.add_scaled(&v, w);
                    for (i, m) in mass.iter_mut().enumerate() {
                        *m += w * v.component_abs(i);
                    }
                }
            }
            Ok((acc, mass))
        })
        .collect();
    let mut value = V::zero();
    let mut abs_mass = vec![0.0; n];
    for row in rows {
        let (v, m) = row?;
        value.add_scaled(&v, 1.0);
        for (a, b) in abs_mass.iter_mut().zip(m) {
            *a += b;
        }
    }
    Ok(GridIntegral { value, abs_mass })
}

/// Integrates `f · ω̆` over `S_r` and repeats on the grid with all node
/// counts doubled; the finer value is returned and per-component
/// convergence flags are attached.
pub fn surface_integrate<V, F>(
    f: &F,
    r: f64,
    q: &QuadratureSpec,
    k: &ModelConstants,
) -> Result<SurfaceIntegral<V>>
where
    V: QuadValue,
    F: Fn(&SlicePoint) -> Result<V> + Sync,
{
    let coarse = integrate_on_grid(f, r, &SphereGrid::from_spec(q), k)?;
    let fine = integrate_on_grid(f, r, &SphereGrid::from_spec(&q.refined()), k)?;
    let n = V::len();
    let mut refinement_change = Vec::with_capacity(n);
    let mut converged = Vec::with_capacity(n);
    for i in 0..n {
        let scale = fine.abs_mass[i].max(fine.value.component_abs(i));
        let diff = fine.value.component_diff(&coarse.value, i);
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        refinement_change.push(rel);
        converged.push(rel < q.rel_tol);
    }
    Ok(SurfaceIntegral {
        value: fine.value,
        abs_mass: fine.abs_mass,
        refinement_change,
        converged,
    })
}

/// Result of extrapolating a radial sequence to `r → ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialLimit {
    pub limit: f64,
    /// Estimated error of `limit`.
    pub residual: f64,
    /// Fitted decay rate `β` in `b e^{−βκr}`; `None` when no exponential
    /// tail was fitted.
    pub rate: Option<f64>,
    pub converged: bool,
}

/// Limit of `L + b e^{−βκr}` through three samples, or `None` when the
/// samples do not look like a decaying exponential.
fn three_point_limit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let [(r1, v1), (r2, v2), (r3, v3)] = [pts[0], pts[1], pts[2]];
    let d1 = v2 - v1;
    let d2 = v3 - v2;
    if d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    let rho = d2 / d1;
    let flat = (r3 - r2) / (r2 - r1);
    if !(rho > 0.0 && rho < flat) {
        return None;
    }
    // ratio(x) = (e^{−x r2} − e^{−x r3}) / (e^{−x r1} − e^{−x r2}), decreasing in x
    let ratio = |x: f64| {
        let a = (-x * (r2 - r1)).exp();
        let b = (-x * (r3 - r1)).exp();
        (a - b) / (1.0 - a)
    };
    let x = if ((r2 - r1) - (r3 - r2)).abs() <= 1e-12 * (r3 - r1) {
        -rho.ln() / (r2 - r1)
    } else {
        let (mut lo, mut hi) = (1e-12, 1.0);
        while ratio(hi) > rho {
            hi *= 2.0;
            if hi > 1e6 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    // v3 − v2 = b (e^{−x r3} − e^{−x r2}); L = v3 − b e^{−x r3}
    let e3 = (-x * (r3 - r2)).exp();
    let tail = d2 * e3 / (e3 - 1.0);
    Some((v3 - tail, x))
}

/// Extrapolates `v(r) → L` assuming `v = L + b e^{−βκr}` on the last
/// triples of samples, with a convergence threshold relative to the
/// sequence magnitude.
pub fn radial_limit(values: &[(f64, f64)], k: &ModelConstants, rel_tol: f64) -> Result<RadialLimit> {
    radial_limit_with_floor(values, k, rel_tol, 0.0)
}

/// As [`radial_limit`], with an absolute error floor used for sequences
/// whose limit is (close to) zero.
pub fn radial_limit_with_floor(
    values: &[(f64, f64)],
    k: &ModelConstants,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<RadialLimit> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidParameter("radial_limit needs at least 3 radii".into()));
    }
    if values.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    if values.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::Divergent("non-finite value in radial sequence".into()));
    }
    let last = &values[n - 3..];
    let mags: Vec<f64> = last.iter().map(|(_, v)| v.abs()).collect();
    let d1 = last[1].1 - last[0].1;
    let d2 = last[2].1 - last[1].1;
    if mags[2] > abs_floor
        && mags[0] < mags[1]
        && mags[1] < mags[2]
        && mags[2] > 1.5 * mags[0]
        && d2.abs() >= d1.abs()
    {
        return Err(Error::Divergent(format!(
            "|v| grows from {:.3e} to {:.3e} over r in [{}, {}]",
            mags[0], mags[2], last[0].0, last[2].0
        )));
    }

    let scale = values.iter().fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    let noise = 64.0 * f64::EPSILON * scale;

    let estimate = |pts: &[(f64, f64)]| -> (f64, Option<f64>, f64) {
        let d1 = pts[1].1 - pts[0].1;
        let d2 = pts[2].1 - pts[1].1;
        if d1.abs().max(d2.abs()) <= noise {
            return (pts[2].1, None, d2.abs());
        }
        match three_point_limit(pts) {
            Some((l, x)) => (l, Some(x / k.kappa()), 0.0),
            None => (pts[2].1, None, d2.abs().max(d1.abs())),
        }
    };

    let (limit, rate, fallback_err) = estimate(last);
    let residual = if n >= 4 {
        let (prev, _, _) = estimate(&values[n - 4..n - 1]);
        (limit - prev).abs().max(fallback_err)
    } else if rate.is_some() {
        (limit - last[2].1).abs()
    } else {
        fallback_err
    };
    let residual = residual.max(noise);
    let converged = residual <= rel_tol * limit.abs() || residual <= abs_floor;
    Ok(RadialLimit {
        limit,
        residual,
        rate,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kappa(k: f64) -> ModelConstants {
        ModelConstants::new(k).unwrap()
    }

    #[test]
    fn constants() {
        let k = kappa(0.5);
        assert_eq!(k.cosmological_constant(), -6.0 * 0.25);
        assert!(ModelConstants::new(0.0).is_err());
        assert!(ModelConstants::new(-1.0).is_err());
    }

    #[test]
    fn frame_scale_examples() {
        let k = kappa(1.0);
        let p = SlicePoint::new(1.3, 0.4, 2.0, 1.0).unwrap();
        assert_eq!(frame_scale(1, &p, &k).unwrap(), 1.0);
        assert!((frame_scale(2, &p, &k).unwrap() - 1.3_f64.sinh()).abs() < 1e-15);
        let q = SlicePoint::new(1.3, PI / 2.0, PI / 2.0, 0.2).unwrap();
        assert!((frame_scale(4, &q, &k).unwrap() - 1.3_f64.sinh()).abs() < 1e-14);
        let pole = SlicePoint::new(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            frame_scale(3, &pole, &k),
            Err(Error::DegenerateCoordinate { .. })
        ));
        assert!(frame_scale(5, &p, &k).is_err());
        assert!((time_scale(&p, &k) - 1.3_f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn measure_density_examples() {
        let k = kappa(2.0);
        let p = SlicePoint::new(0.7, PI / 2.0, PI / 2.0, 0.0).unwrap();
        let s = (1.4_f64).sinh() / 2.0;
        assert!((sphere_measure_density(&p, &k).unwrap() - s.powi(3)).abs() < 1e-15);
        let pole = SlicePoint::new(0.7, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(sphere_measure_density(&pole, &k).unwrap(), 0.0);
        let origin = SlicePoint::new(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(sphere_measure_density(&origin, &k).is_err());
    }

    #[test]
    fn connection_radial_family() {
        let k = kappa(1.0);
        let r = 0.9;
        let p = SlicePoint::new(r, PI / 2.0, PI / 2.0, 0.0).unwrap();
        let w = spin_connection(&p, &k).unwrap();
        let coth = 1.0 / r.tanh();
        assert!((w.get(2, 1, 2) - coth).abs() < 1e-15);
        for a in 2..=4 {
            assert!((w.get(a, 1, a) - coth).abs() < 1e-14);
        }
        assert_eq!(compatibility_residual(&w), 0.0);
    }

    #[test]
    fn torsion_residual_is_second_order() {
        let k = kappa(1.3);
        let p = SlicePoint::new(0.8, 1.1, 0.7, 2.0).unwrap();
        let r1 = torsion_residual(&p, &k, 1e-2).unwrap();
        let r2 = torsion_residual(&p, &k, 5e-3).unwrap();
        assert!(r1 < 1e-3, "{r1}");
        let ratio = r1 / r2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn gauss_legendre_small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - (1.0 / 3.0_f64).sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials_in_the_angle() {
        // degree ≤ 2n − 1 in θ itself is integrated exactly
        for n in [4usize, 9, 16] {
            let grid = SphereGrid::new(n, 4, 4);
            for deg in 0..(2 * n) {
                let approx: f64 = grid.theta.iter().map(|(t, w)| w * t.powi(deg as i32)).sum();
                let exact = PI.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!(
                    (approx - exact).abs() <= 1e-13 * exact.max(1.0),
                    "n={n} deg={deg}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn unit_function_gives_sphere_volume() {
        let k = kappa(1.0);
        let q = QuadratureSpec {
            ntheta: 8,
            npsi: 8,
            nphi: 8,
            ..QuadratureSpec::default()
        };
        let res = surface_integrate(&|_: &SlicePoint| Ok(1.0), 1.0, &q, &k).unwrap();
        let exact = 2.0 * PI * PI * 1.0_f64.sinh().powi(3);
        assert!((res.value - exact).abs() < 1e-10 * exact);
        assert!(res.all_converged());
    }

    #[test]
    fn odd_and_harmonic_integrands_vanish() {
        let k = kappa(1.0);
        let q = QuadratureSpec::default();
        let res = surface_integrate(&|p: &SlicePoint| Ok(p.theta.cos()), 1.0, &q, &k).unwrap();
        assert!(res.value.abs() < 1e-8 * res.abs_mass[0]);
        let res = surface_integrate(&|p: &SlicePoint| Ok(p.phi.sin()), 1.0, &q, &k).unwrap();
        assert!(res.value.abs() < 1e-13 * res.abs_mass[0], "{}", res.value);
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let k = kappa(1.0);
        let q = QuadratureSpec::default();
        let err = surface_integrate(&|_: &SlicePoint| Ok(f64::NAN), 1.0, &q, &k).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn vector_integrands() {
        let k = kappa(1.0);
        let grid = SphereGrid::new(32, 32, 6);
        let res = integrate_on_grid(
            &|p: &SlicePoint| Ok([1.0, p.psi.cos()]),
            0.5,
            &grid,
            &k,
        )
        .unwrap();
        let vol = 2.0 * PI * PI * 0.5_f64.sinh().powi(3);
        assert!((res.value[0] - vol).abs() < 1e-9 * vol);
        assert!(res.value[1].abs() < 1e-12 * vol);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let mut q = QuadratureSpec::default();
        q.nphi = 5;
        assert!(q.validate().is_err());
        let mut q = QuadratureSpec::default();
        q.radii = vec![1.0, 2.0];
        assert!(q.validate().is_err());
        let mut q = QuadratureSpec::default();
        q.radii = vec![1.0, 3.0, 2.0];
        assert!(q.validate().is_err());
        let q = QuadratureSpec::for_constants(&kappa(2.0));
        assert_eq!(q.radii, vec![2.0, 2.5, 3.0, 3.5]);
    }

    #[test]
    fn radial_limit_constant() {
        let k = kappa(1.0);
        let v: Vec<_> = [3.0, 4.0, 5.0, 6.0].iter().map(|r| (*r, 3.0)).collect();
        let l = radial_limit(&v, &k, 1e-8).unwrap();
        assert_eq!(l.limit, 3.0);
        assert!(l.converged);
    }

    #[test]
    fn radial_limit_exponential_tail() {
        let k = kappa(1.0);
        let v: Vec<_> = [3.0, 4.0, 5.0, 6.0]
            .iter()
            .map(|r: &f64| (*r, 5.0 + (-2.0 * r).exp()))
            .collect();
        let l = radial_limit(&v, &k, 1e-8).unwrap();
        assert!((l.limit - 5.0).abs() < 1e-6);
        assert!((l.rate.unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn radial_limit_uneven_spacing() {
        let k = kappa(2.0);
        let v: Vec<_> = [1.0, 1.7, 2.1, 3.0]
            .iter()
            .map(|r: &f64| (*r, -1.5 + 4.0 * (-3.0 * 2.0 * r).exp()))
            .collect();
        let l = radial_limit(&v, &k, 1e-8).unwrap();
        assert!((l.limit + 1.5).abs() < 1e-10, "{}", l.limit);
        assert!((l.rate.unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn radial_limit_divergence() {
        let k = kappa(1.0);
        let v: Vec<_> = [3.0, 4.0, 5.0, 6.0].iter().map(|r: &f64| (*r, r.exp())).collect();
        assert!(matches!(radial_limit(&v, &k, 1e-8), Err(Error::Divergent(_))));
        assert!(radial_limit(&v[..2], &k, 1e-8).is_err());
    }

    #[test]
    fn radial_limit_zero_sequence() {
        let k = kappa(1.0);
        let v: Vec<_> = [3.0, 4.0, 5.0].iter().map(|r| (*r, 0.0)).collect();
        let l = radial_limit(&v, &k, 1e-8).unwrap();
        assert_eq!(l.limit, 0.0);
        assert!(l.converged);
    }
}

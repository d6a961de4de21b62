//! Imaginary Killing spinors on the hyperbolic slice in closed form, and a
//! finite-difference residual of `∇_X Φ + (κ√−1/2) X·Φ = 0`.
//!
//! The spinor covariant derivative is
//! `∇_{ĕ_a} Φ = ĕ_a(Φ) + ¼ Σ_{b,c} ⟨∇̆_{ĕ_a} ĕ_b, ĕ_c⟩ γ_b γ_c Φ`,
//! which in terms of [`ConnectionCoefficients`] reads
//! `ĕ_a(Φ) − ¼ Σ ω_{bc a} γ_b γ_c Φ`. The slice `t = 0` is totally geodesic,
//! so the spacetime connection contributes no `γ₀` terms along it.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{gamma_complex, SpinorValue};
use crate::error::{Error, Result};
use crate::geometry::{frame_scale, spin_connection, ConnectionCoefficients, ModelConstants, SlicePoint};

/// The four free complex parameters of an imaginary Killing spinor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KillingParams(pub [Complex64; 4]);

impl KillingParams {
    pub fn new(lambda: [Complex64; 4]) -> Self {
        Self(lambda)
    }

    pub fn from_parts(parts: [(f64, f64); 4]) -> Self {
        Self(parts.map(|(re, im)| Complex64::new(re, im)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|l| *l == Complex64::new(0.0, 0.0))
    }
}

/// Angular profiles `u⁺, u⁻, v⁺, v⁻` of a Killing spinor at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinorProfiles {
    pub u_plus: Complex64,
    pub u_minus: Complex64,
    pub v_plus: Complex64,
    pub v_minus: Complex64,
}

/// Closed-form profiles in half-angles of `θ, ψ` and phases `e^{∓√−1 φ/2}`.
pub fn profiles(lambda: &KillingParams, theta: f64, psi: f64, phi: f64) -> SpinorProfiles {
    let [l1, l2, l3, l4] = lambda.0;
    let i = Complex64::i();
    let em = Complex64::from_polar(1.0, -0.5 * phi);
    let ep = Complex64::from_polar(1.0, 0.5 * phi);
    let (sp, cp) = (0.5 * psi).sin_cos();
    let (st, ct) = (0.5 * theta).sin_cos();

    let a = l1 * em * cp + l2 * ep * sp;
    let b = l3 * em * cp + l4 * ep * sp;
    let c = -l1 * em * sp + l2 * ep * cp;
    let d = l3 * em * sp - l4 * ep * cp;

    SpinorProfiles {
        u_plus: a * ct + b * st,
        u_minus: -i * a * st + i * b * ct,
        v_plus: i * c * ct + i * d * st,
        v_minus: -c * st + d * ct,
    }
}

/// `Φ₀ = (u⁺e^{κr/2} + u⁻e^{−κr/2}, v⁺e^{κr/2} + v⁻e^{−κr/2},
/// √−1(u⁺e^{κr/2} − u⁻e^{−κr/2}), √−1(v⁺e^{κr/2} − v⁻e^{−κr/2}))`.
pub fn killing_spinor(lambda: &KillingParams, p: &SlicePoint, k: &ModelConstants) -> SpinorValue {
    let pr = profiles(lambda, p.theta, p.psi, p.phi);
    let grow = (0.5 * k.kappa() * p.r).exp();
    let decay = (-0.5 * k.kappa() * p.r).exp();
    let i = Complex64::i();
    SpinorValue::new([
        pr.u_plus * grow + pr.u_minus * decay,
        pr.v_plus * grow + pr.v_minus * decay,
        i * (pr.u_plus * grow - pr.u_minus * decay),
        i * (pr.v_plus * grow - pr.v_minus * decay),
    ])
}

/// Connection term `−¼ Σ ω_{bc a} γ_b γ_c Φ` along `ĕ_a`.
pub fn connection_term(w: &ConnectionCoefficients, direction: usize, phi: &SpinorValue) -> SpinorValue {
    let mut out = SpinorValue::zero();
    for b in 1..=4 {
        for c in 1..=4 {
            let coeff = w.get(b, c, direction);
            if coeff == 0.0 {
                continue;
            }
            let gg = gamma_complex(b) * gamma_complex(c);
            out += phi.apply(&gg) * Complex64::from(-0.25 * coeff);
        }
    }
    out
}

/// Norm of `∇_{ĕ_a}Φ₀ + (κ√−1/2) γ_a Φ₀` with the directional derivative
/// taken by central differences of coordinate step `h`.
pub fn killing_spinor_residual(
    lambda: &KillingParams,
    p: &SlicePoint,
    direction: usize,
    h: f64,
    k: &ModelConstants,
) -> Result<f64> {
    if !(1..=4).contains(&direction) {
        return Err(Error::InvalidIndex(direction));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {h}")));
    }
    let w = spin_connection(p, k)?;
    let scale = frame_scale(direction, p, k)?;
    let coord = direction - 1;
    let plus = p.shifted(coord, h);
    let minus = p.shifted(coord, -h);
    if coord > 0 && coord < 3 {
        let c = p.coords()[coord];
        if c - h <= 0.0 || c + h >= std::f64::consts::PI {
            return Err(Error::DegenerateCoordinate {
                r: p.r,
                theta: p.theta,
                psi: p.psi,
                what: "finite-difference stencil crosses a pole",
            });
        }
    } else if coord == 0 && p.r - h <= 0.0 {
        return Err(Error::DegenerateCoordinate {
            r: p.r,
            theta: p.theta,
            psi: p.psi,
            what: "finite-difference stencil crosses r = 0",
        });
    }
    let phi = killing_spinor(lambda, p, k);
    let derivative = (killing_spinor(lambda, &plus, k) - killing_spinor(lambda, &minus, k))
        * (1.0 / (2.0 * h * scale));
    let clifford = phi.apply(gamma_complex(direction)) * Complex64::new(0.0, 0.5 * k.kappa());
    Ok((derivative + connection_term(&w, direction, &phi) + clifford).norm())
}

/// One randomly drawn residual check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub lambda: KillingParams,
    pub point: SlicePoint,
    pub direction: usize,
    pub spinor_norm: f64,
    pub residual_h: f64,
    pub residual_half_h: f64,
    /// `residual(h) / residual(h/2)`; `None` when both vanish.
    pub ratio: Option<f64>,
}

/// Draws `n` samples `(λ, point, direction)` with a seeded generator and
/// evaluates the residual at steps `h` and `h/2`.
///
/// Points are drawn from `r ∈ [0.3, 2]`, `θ, ψ ∈ [0.3, π − 0.3]`, `φ ∈ [0, 2π)`
/// and `λ` components from the unit square.
pub fn residual_samples(
    seed: u64,
    n: usize,
    h: f64,
    k: &ModelConstants,
) -> Result<Vec<ResidualSample>> {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let lambda = KillingParams(std::array::from_fn(|_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }));
        let point = SlicePoint::new(
            rng.random_range(0.3..2.0) / k.kappa(),
            rng.random_range(0.3..PI - 0.3),
            rng.random_range(0.3..PI - 0.3),
            rng.random_range(0.0..2.0 * PI),
        )?;
        let direction = rng.random_range(1..=4);
        let residual_h = killing_spinor_residual(&lambda, &point, direction, h, k)?;
        let residual_half_h = killing_spinor_residual(&lambda, &point, direction, 0.5 * h, k)?;
        let ratio = (residual_half_h > 0.0).then(|| residual_h / residual_half_h);
        out.push(ResidualSample {
            lambda,
            point,
            direction,
            spinor_norm: killing_spinor(&lambda, &point, k).norm(),
            residual_h,
            residual_half_h,
            ratio,
        });
    }
    Ok(out)
}

//! The fixed complex representation of the spacetime Clifford algebra, spinor
//! values with their Hermitian product, and the curvature term of the
//! Weitzenböck formula.
//!
//! The five generators are stored with Gaussian-integer entries so that the
//! algebraic identities can be checked with exact arithmetic. With this
//! representation `γ₀² = +Id` and `γᵢ² = −Id`, i.e.
//! `γ_α γ_β + γ_β γ_α = −2 η_αβ Id` with `η = diag(−1, 1, 1, 1, 1)`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::LazyLock;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal of the frame metric `η_αβ`.
pub const FRAME_METRIC: [i64; 5] = [-1, 1, 1, 1, 1];

/// A complex number with integer parts; closed under the products we need.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct GaussianInt {
    pub re: i64,
    pub im: i64,
}

impl GaussianInt {
    pub const ZERO: Self = Self { re: 0, im: 0 };
    pub const ONE: Self = Self { re: 1, im: 0 };
    pub const I: Self = Self { re: 0, im: 1 };

    pub const fn new(re: i64, im: i64) -> Self {
        Self { re, im }
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

impl Add for GaussianInt {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for GaussianInt {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for GaussianInt {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul for GaussianInt {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re, self.im) {
            (re, 0) => write!(f, "{re}"),
            (0, im) => write!(f, "{im}i"),
            (re, im) if im < 0 => write!(f, "{re}{im}i"),
            (re, im) => write!(f, "{re}+{im}i"),
        }
    }
}

/// A 4×4 matrix with exact Gaussian-integer entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CliffordMatrix {
    entries: [[GaussianInt; 4]; 4],
}

impl CliffordMatrix {
    pub fn zero() -> Self {
        Self {
            entries: [[GaussianInt::ZERO; 4]; 4],
        }
    }

    pub fn identity() -> Self {
        Self::scalar(GaussianInt::ONE)
    }

    pub fn scalar(s: GaussianInt) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.entries[i][i] = s;
        }
        m
    }

    /// Assemble from 2×2 blocks `[[a, b], [c, d]]`.
    fn from_blocks(blocks: [[[[GaussianInt; 2]; 2]; 2]; 2]) -> Self {
        let mut m = Self::zero();
        for (bi, row) in blocks.iter().enumerate() {
            for (bj, block) in row.iter().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        m.entries[2 * bi + i][2 * bj + j] = block[i][j];
                    }
                }
            }
        }
        m
    }

    pub fn entry(&self, i: usize, j: usize) -> GaussianInt {
        self.entries[i][j]
    }

    pub fn entries(&self) -> &[[GaussianInt; 4]; 4] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.entries[i][j] = self.entries[j][i].conj();
            }
        }
        m
    }

    pub fn is_hermitian(&self) -> bool {
        self.adjoint() == *self
    }

    pub fn is_anti_hermitian(&self) -> bool {
        self.adjoint() == -*self
    }

    pub fn to_complex(&self) -> Matrix4<Complex64> {
        Matrix4::from_fn(|i, j| self.entries[i][j].to_complex())
    }
}

impl Add for CliffordMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..4 {
            for j in 0..4 {
                self.entries[i][j] = self.entries[i][j] + rhs.entries[i][j];
            }
        }
        self
    }
}

impl Neg for CliffordMatrix {
    type Output = Self;
    fn neg(mut self) -> Self {
        for row in self.entries.iter_mut() {
            for e in row.iter_mut() {
                *e = -*e;
            }
        }
        self
    }
}

impl Mul for CliffordMatrix {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = GaussianInt::ZERO;
                for k in 0..4 {
                    acc = acc + self.entries[i][k] * rhs.entries[k][j];
                }
                m.entries[i][j] = acc;
            }
        }
        m
    }
}

const O: GaussianInt = GaussianInt::ZERO;
const P: GaussianInt = GaussianInt::ONE;
const M: GaussianInt = GaussianInt::new(-1, 0);
const PI: GaussianInt = GaussianInt::I;
const MI: GaussianInt = GaussianInt::new(0, -1);

const ID2: [[GaussianInt; 2]; 2] = [[P, O], [O, P]];
const NEG_ID2: [[GaussianInt; 2]; 2] = [[M, O], [O, M]];
const ZERO2: [[GaussianInt; 2]; 2] = [[O, O], [O, O]];
// quaternion units i, j, k as 2×2 complex matrices
const QUAT_I: [[GaussianInt; 2]; 2] = [[PI, O], [O, MI]];
const QUAT_J: [[GaussianInt; 2]; 2] = [[O, P], [M, O]];
const QUAT_K: [[GaussianInt; 2]; 2] = [[O, PI], [PI, O]];

/// The generator representing the frame vector `ĕ_α`, `α ∈ 0..=4`.
pub fn gamma(alpha: usize) -> Result<CliffordMatrix> {
    let blocks = match alpha {
        0 => [[ID2, ZERO2], [ZERO2, NEG_ID2]],
        1 => [[ZERO2, ID2], [NEG_ID2, ZERO2]],
        2 => [[ZERO2, QUAT_I], [QUAT_I, ZERO2]],
        3 => [[ZERO2, QUAT_J], [QUAT_J, ZERO2]],
        4 => [[ZERO2, QUAT_K], [QUAT_K, ZERO2]],
        _ => return Err(Error::InvalidIndex(alpha)),
    };
    Ok(CliffordMatrix::from_blocks(blocks))
}

static GAMMA_COMPLEX: LazyLock<[Matrix4<Complex64>; 5]> = LazyLock::new(|| {
    std::array::from_fn(|a| gamma(a).expect("index in range").to_complex())
});

/// Floating-point copy of [`gamma`]; panics on an index outside `0..=4`.
pub fn gamma_complex(alpha: usize) -> &'static Matrix4<Complex64> {
    &GAMMA_COMPLEX[alpha]
}

pub fn anticommutator(a: &CliffordMatrix, b: &CliffordMatrix) -> CliffordMatrix {
    *a * *b + *b * *a
}

/// Outcome of checking one relation `{γ_α, γ_β} = −2 η_αβ Id`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnticommutatorCheck {
    pub alpha: usize,
    pub beta: usize,
    /// The coefficient `−2 η_αβ` of the identity on the right-hand side.
    pub expected: i64,
    pub holds: bool,
}

/// Checks all 25 ordered pairs with exact arithmetic.
pub fn verify_anticommutators() -> Vec<AnticommutatorCheck> {
    let gammas: Vec<CliffordMatrix> = (0..5).map(|a| gamma(a).unwrap()).collect();
    let mut out = Vec::with_capacity(25);
    for alpha in 0..5 {
        for beta in 0..5 {
            let expected = if alpha == beta {
                -2 * FRAME_METRIC[alpha]
            } else {
                0
            };
            let lhs = anticommutator(&gammas[alpha], &gammas[beta]);
            let rhs = CliffordMatrix::scalar(GaussianInt::new(expected, 0));
            out.push(AnticommutatorCheck {
                alpha,
                beta,
                expected,
                holds: lhs == rhs,
            });
        }
    }
    out
}

/// A section value of the spinor bundle: four complex components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpinorValue(pub [Complex64; 4]);

impl SpinorValue {
    pub fn new(c: [Complex64; 4]) -> Self {
        Self(c)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[Complex64; 4] {
        &self.0
    }

    /// Hermitian product `Σ conj(self_a) other_a`, antilinear in `self`.
    pub fn inner(&self, other: &SpinorValue) -> Complex64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn apply(&self, m: &Matrix4<Complex64>) -> SpinorValue {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o += m[(i, j)] * self.0[j];
            }
        }
        SpinorValue(out)
    }
}

impl Add for SpinorValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        SpinorValue(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl AddAssign for SpinorValue {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..4 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl Sub for SpinorValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        SpinorValue(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<Complex64> for SpinorValue {
    type Output = Self;
    fn mul(self, s: Complex64) -> Self {
        SpinorValue(self.0.map(|c| c * s))
    }
}

impl Mul<f64> for SpinorValue {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        SpinorValue(self.0.map(|c| c * s))
    }
}

/// `⟨φ, A ψ⟩` under the standard Hermitian product.
pub fn bilinear(phi: &SpinorValue, a: &Matrix4<Complex64>, psi: &SpinorValue) -> Complex64 {
    phi.inner(&psi.apply(a))
}

/// Frame components `T_αβ` of the energy-momentum tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StressEnergy {
    t: [[f64; 5]; 5],
}

impl StressEnergy {
    /// Rejects non-symmetric or non-finite input.
    pub fn new(t: [[f64; 5]; 5]) -> Result<Self> {
        for a in 0..5 {
            for b in 0..5 {
                if !t[a][b].is_finite() {
                    return Err(Error::InvalidParameter(format!("T[{a}][{b}] is not finite")));
                }
                if t[a][b] != t[b][a] {
                    return Err(Error::InvalidParameter(format!(
                        "T is not symmetric at ({a},{b})"
                    )));
                }
            }
        }
        Ok(Self { t })
    }

    /// Builds a symmetric tensor from its upper triangle.
    pub fn from_upper(t: [[f64; 5]; 5]) -> Result<Self> {
        let mut s = t;
        for a in 0..5 {
            for b in 0..a {
                s[a][b] = t[b][a];
            }
        }
        Self::new(s)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.t[a][b]
    }

    pub fn components(&self) -> &[[f64; 5]; 5] {
        &self.t
    }

    /// Largest absolute entry, used as the tensor scale in tolerances.
    pub fn max_abs(&self) -> f64 {
        self.t
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `½ (T₀₀ γ₀ + Σᵢ T₀ᵢ γᵢ) γ₀ φ`.
pub fn weitzenboeck_endomorphism(t: &StressEnergy, phi: &SpinorValue) -> SpinorValue {
    let mut m = gamma_complex(0) * Complex64::from(t.get(0, 0));
    for i in 1..5 {
        m += gamma_complex(i) * Complex64::from(t.get(0, i));
    }
    let op = m * gamma_complex(0) * Complex64::from(0.5);
    phi.apply(&op)
}

/// Dominant energy condition: `T₀₀ ≥ |T₀·|` and `T₀₀ ≥ |T_αβ|` entrywise.
pub fn dec_check(t: &StressEnergy) -> bool {
    let t00 = t.get(0, 0);
    let flux = (1..5).map(|i| t.get(0, i).powi(2)).sum::<f64>().sqrt();
    t00 >= flux && t00 >= t.max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gamma0_is_block_diag() {
        let g0 = gamma(0).unwrap();
        let expected = CliffordMatrix::from_blocks([[ID2, ZERO2], [ZERO2, NEG_ID2]]);
        assert_eq!(g0, expected);
        assert_eq!(g0 * g0, CliffordMatrix::identity());
    }

    #[test]
    fn gamma1_gamma2_anticommute() {
        let g1 = gamma(1).unwrap();
        let g2 = gamma(2).unwrap();
        assert_eq!(anticommutator(&g1, &g2), CliffordMatrix::zero());
    }

    #[test]
    fn all_relations_hold_exactly() {
        let checks = verify_anticommutators();
        assert_eq!(checks.len(), 25);
        assert!(checks.iter().all(|c| c.holds));
        // spatial generators square to −Id
        for a in 1..5 {
            let g = gamma(a).unwrap();
            assert_eq!(g * g, -CliffordMatrix::identity());
        }
    }

    #[test]
    fn hermiticity_pattern() {
        assert!(gamma(0).unwrap().is_hermitian());
        for a in 1..5 {
            let g = gamma(a).unwrap();
            assert!(g.is_anti_hermitian(), "gamma_{a}");
            assert!(!g.is_hermitian());
        }
    }

    #[test]
    fn out_of_range_index() {
        assert_eq!(gamma(5), Err(Error::InvalidIndex(5)));
    }

    #[test]
    fn bilinear_examples() {
        let e1 = SpinorValue::new([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(bilinear(&e1, gamma_complex(0), &e1), c(1.0, 0.0));

        let phi = SpinorValue::new([c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0), c(2.0, 0.1)]);
        let id = Matrix4::<Complex64>::identity();
        let n = bilinear(&phi, &id, &phi);
        assert_eq!(n.im, 0.0);
        assert!((n.re - phi.norm_sqr()).abs() < 1e-14);

        let psi = SpinorValue::new([c(0.2, 0.0), c(1.0, -1.0), c(0.4, 0.4), c(-1.0, 0.0)]);
        let a = gamma_complex(0) * gamma_complex(3);
        let lhs = bilinear(&phi, &a, &psi);
        let rhs = bilinear(&psi, &a.adjoint(), &phi).conj();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn weitzenboeck_examples() {
        let phi = SpinorValue::new([c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0), c(2.0, 0.1)]);
        assert_eq!(
            weitzenboeck_endomorphism(&StressEnergy::zero(), &phi),
            SpinorValue::zero()
        );
        let mut t = [[0.0; 5]; 5];
        t[0][0] = 1.0;
        let out = weitzenboeck_endomorphism(&StressEnergy::new(t).unwrap(), &phi);
        assert!((out - phi * 0.5).norm() < 1e-15);
    }

    #[test]
    fn dec_examples() {
        assert!(dec_check(&StressEnergy::zero()));

        let mut t = [[0.0; 5]; 5];
        t[0][0] = 1.0;
        t[0][1] = 2.0;
        assert!(!dec_check(&StressEnergy::from_upper(t).unwrap()));

        let mut t = [[0.0; 5]; 5];
        t[0][0] = 2.0;
        t[0][1] = 1.0;
        t[0][2] = 1.0;
        t[3][4] = -2.0;
        t[1][1] = 1.5;
        assert!(dec_check(&StressEnergy::from_upper(t).unwrap()));
    }

    #[test]
    fn stress_energy_rejects_asymmetry() {
        let mut t = [[0.0; 5]; 5];
        t[0][1] = 1.0;
        assert!(StressEnergy::new(t).is_err());
    }
}

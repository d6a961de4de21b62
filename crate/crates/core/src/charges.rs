//! Total energy `E₀` and the fourteen momenta `cᵢ, c′ᵢ, J_ij` as limits of
//! weighted sphere integrals of the aspect fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    integrate_on_grid, radial_limit_with_floor, surface_integrate, QuadratureSpec, SlicePoint, SphereGrid,
};
use crate::initial_data::{mass_aspect, momentum_aspect, DerivativeMode, InitialData};
use crate::killing::{killing_vector_frame, KillingLabel};

/// Angular momenta `J_ij`, `1 ≤ i < j ≤ 4`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AngularMomenta {
    #[serde(rename = "12")]
    pub j12: f64,
    #[serde(rename = "13")]
    pub j13: f64,
    #[serde(rename = "14")]
    pub j14: f64,
    #[serde(rename = "23")]
    pub j23: f64,
    #[serde(rename = "24")]
    pub j24: f64,
    #[serde(rename = "34")]
    pub j34: f64,
}

impl AngularMomenta {
    pub const PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

    /// Antisymmetric access, `J_ji = −J_ij`, `J_ii = 0`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        s * self.as_array()[Self::PAIRS.iter().position(|p| *p == (a, b)).expect("pair")]
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.j12, self.j13, self.j14, self.j23, self.j24, self.j34]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            j12: v[0],
            j13: v[1],
            j14: v[2],
            j23: v[3],
            j24: v[4],
            j34: v[5],
        }
    }
}

/// Convergence record of one charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeDiagnostic {
    pub name: String,
    /// `(r, surface integral at r)`.
    pub radial_values: Vec<(f64, f64)>,
    /// Largest relative change under grid refinement over all radii;
    /// `None` on a fixed sampled grid.
    pub quadrature_change: Option<f64>,
    pub quadrature_converged: bool,
    pub extrapolation_residual: f64,
    pub decay_rate: Option<f64>,
    pub limit_converged: bool,
    pub divergent: bool,
    pub message: Option<String>,
}

/// The fifteen charges with per-charge diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargeSet {
    pub e0: f64,
    /// `c₁..c₄`.
    pub c: [f64; 4],
    /// `c′₁..c′₄`.
    pub cp: [f64; 4],
    pub j: AngularMomenta,
    #[serde(default)]
    pub diagnostics: Vec<ChargeDiagnostic>,
}

/// Names of the fifteen charges in integrand order.
pub const CHARGE_NAMES: [&str; 15] = [
    "e0", "c1", "c2", "c3", "c4", "cp1", "cp2", "cp3", "cp4", "j12", "j13", "j14", "j23", "j24", "j34",
];

impl ChargeSet {
    /// `[E₀, c₁..c₄, c′₁..c′₄, J₁₂, J₁₃, J₁₄, J₂₃, J₂₄, J₃₄]`.
    pub fn to_array(&self) -> [f64; 15] {
        let mut v = [0.0; 15];
        v[0] = self.e0;
        v[1..5].copy_from_slice(&self.c);
        v[5..9].copy_from_slice(&self.cp);
        v[9..].copy_from_slice(&self.j.as_array());
        v
    }

    pub fn from_array(v: [f64; 15]) -> Self {
        Self {
            e0: v[0],
            c: [v[1], v[2], v[3], v[4]],
            cp: [v[5], v[6], v[7], v[8]],
            j: AngularMomenta::from_array([v[9], v[10], v[11], v[12], v[13], v[14]]),
            diagnostics: Vec::new(),
        }
    }

    pub fn any_divergent(&self) -> bool {
        self.diagnostics.iter().any(|d| d.divergent)
    }

    pub fn all_converged(&self) -> bool {
        self.diagnostics
            .iter()
            .all(|d| d.quadrature_converged && d.limit_converged && !d.divergent)
    }
}

/// The fifteen integrands at one point, each already multiplied by its
/// normalisation `κ/16π` or `κ/8π`.
pub fn charge_integrands(model: &dyn InitialData, p: &SlicePoint, mode: DerivativeMode) -> Result<[f64; 15]> {
    let k = model.constants();
    let energy_norm = k.kappa() / (16.0 * PI);
    let momentum_norm = k.kappa() / (8.0 * PI);
    let frame = |a: u8, b: u8| -> Result<[f64; 5]> {
        Ok(killing_vector_frame(KillingLabel::new(a, b)?, p, &k)?.0)
    };
    let e1 = mass_aspect(model, p, mode)?[0];
    let pm = momentum_aspect(model, p)?;
    // 𝒫_{j1} for j = 2..4
    let p_j1 = [pm[1][0], pm[2][0], pm[3][0]];
    let contract = |u: [f64; 5]| momentum_norm * (p_j1[0] * u[2] + p_j1[1] * u[3] + p_j1[2] * u[4]);

    let mut out = [0.0; 15];
    out[0] = energy_norm * e1 * frame(5, 0)?[0];
    for i in 1..=4u8 {
        out[i as usize] = energy_norm * e1 * frame(i, 5)?[0];
        out[4 + i as usize] = contract(frame(i, 0)?);
    }
    for (n, (a, b)) in AngularMomenta::PAIRS.iter().enumerate() {
        out[9 + n] = contract(frame(*a as u8, *b as u8)?);
    }
    Ok(out)
}

/// Charges of `model`: surface integrals at every radius of `q`, then
/// radial extrapolation per charge. Models sampled on a grid are integrated
/// on their own nodes and radii.
pub fn compute_charges(model: &dyn InitialData, q: &QuadratureSpec, mode: DerivativeMode) -> Result<ChargeSet> {
    let k = model.constants();
    let f = |p: &SlicePoint| charge_integrands(model, p, mode);
    let mut per_radius: Vec<(f64, [f64; 15], [f64; 15], Option<[f64; 15]>)> = Vec::new();
    let rel_tol = q.rel_tol;
    match model.native_grid() {
        Some(g) => {
            let grid = SphereGrid::new(g.ntheta, g.npsi, g.nphi);
            for &r in &g.radii {
                let res = integrate_on_grid(&f, r, &grid, &k)?;
                let mass: [f64; 15] = res.abs_mass.try_into().expect("15 components");
                per_radius.push((r, res.value, mass, None));
            }
        }
        None => {
            q.validate()?;
            for &r in &q.radii {
                let res = surface_integrate(&f, r, q, &k)?;
                let mass: [f64; 15] = res.abs_mass.try_into().expect("15 components");
                let change: [f64; 15] = res.refinement_change.try_into().expect("15 components");
                per_radius.push((r, res.value, mass, Some(change)));
            }
        }
    }
    if per_radius.len() < 3 {
        return Err(Error::InvalidParameter("charges need at least 3 radii".into()));
    }

    // zero-valued charges are judged against the overall size of the set
    let last = per_radius.last().expect("radii");
    let set_scale = last.2.iter().fold(0.0_f64, |m, v| m.max(*v));
    let abs_floor = rel_tol * set_scale;

    let mut values = [0.0; 15];
    let mut diagnostics = Vec::with_capacity(15);
    for (n, name) in CHARGE_NAMES.iter().enumerate() {
        let seq: Vec<(f64, f64)> = per_radius.iter().map(|(r, v, _, _)| (*r, v[n])).collect();
        let quadrature_change = per_radius
            .iter()
            .map(|(_, _, _, c)| c.map(|c| c[n]))
            .try_fold(0.0_f64, |m, c| c.map(|c| m.max(c)));
        let quadrature_converged = per_radius.iter().all(|(_, v, mass, c)| match c {
            None => true,
            Some(c) => c[n] < rel_tol || c[n] * mass[n].max(v[n].abs()) <= abs_floor,
        });
        let diag = match radial_limit_with_floor(&seq, &k, rel_tol, abs_floor) {
            Ok(lim) => {
                values[n] = lim.limit;
                ChargeDiagnostic {
                    name: name.to_string(),
                    radial_values: seq,
                    quadrature_change,
                    quadrature_converged,
                    extrapolation_residual: lim.residual,
                    decay_rate: lim.rate,
                    limit_converged: lim.converged,
                    divergent: false,
                    message: None,
                }
            }
            Err(Error::Divergent(msg)) => {
                values[n] = seq.last().expect("radii").1;
                ChargeDiagnostic {
                    name: name.to_string(),
                    radial_values: seq,
                    quadrature_change,
                    quadrature_converged,
                    extrapolation_residual: f64::INFINITY,
                    decay_rate: None,
                    limit_converged: false,
                    divergent: true,
                    message: Some(msg),
                }
            }
            Err(e) => return Err(e),
        };
        diagnostics.push(diag);
    }
    let mut cs = ChargeSet::from_array(values);
    cs.diagnostics = diagnostics;
    Ok(cs)
}

/// Combinations of the momenta entering the lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedCharges {
    /// `Ĵ = (J₂₃, −J₁₃, J₁₂)`.
    pub j_hat: [f64; 3],
    /// `J₍₄₎ = (J₁₄, J₂₄, J₃₄)`.
    pub j4: [f64; 3],
    pub c: [f64; 3],
    pub cp: [f64; 3],
    pub c4: f64,
    pub cp4: f64,
    /// `|L|² = 2(|c|² + |Ĵ|² + c′₄²)`.
    pub l_sq: f64,
    /// `A = c₄² + c′₄² + |c|² + |c′|² + |Ĵ|² + |J₍₄₎|²`.
    pub a: f64,
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn derived(cs: &ChargeSet) -> DerivedCharges {
    let j = &cs.j;
    let j_hat = [j.get(2, 3), -j.get(1, 3), j.get(1, 2)];
    let j4 = [j.get(1, 4), j.get(2, 4), j.get(3, 4)];
    let c = [cs.c[0], cs.c[1], cs.c[2]];
    let cp = [cs.cp[0], cs.cp[1], cs.cp[2]];
    let (c4, cp4) = (cs.c[3], cs.cp[3]);
    let l_sq = 2.0 * (dot(&c, &c) + dot(&j_hat, &j_hat) + cp4 * cp4);
    let a = c4 * c4 + cp4 * cp4 + dot(&c, &c) + dot(&cp, &cp) + dot(&j_hat, &j_hat) + dot(&j4, &j4);
    DerivedCharges {
        j_hat,
        j4,
        c,
        cp,
        c4,
        cp4,
        l_sq,
        a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelConstants;
    use crate::initial_data::{AdsExact, OffdiagMomentum, Profile, RadialBump};

    fn quick() -> QuadratureSpec {
        QuadratureSpec {
            ntheta: 12,
            npsi: 12,
            nphi: 8,
            radii: vec![4.0, 5.0, 6.0, 7.0],
            rel_tol: 1e-6,
        }
    }

    #[test]
    fn json_layout() {
        let mut cs = ChargeSet::from_array(std::array::from_fn(|n| n as f64));
        cs.diagnostics.clear();
        let v = serde_json::to_value(&cs).unwrap();
        assert_eq!(v["e0"], 0.0);
        assert_eq!(v["c"][3], 4.0);
        assert_eq!(v["cp"][0], 5.0);
        assert_eq!(v["j"]["12"], 9.0);
        assert_eq!(v["j"]["34"], 14.0);
        let back: ChargeSet = serde_json::from_str(r#"{"e0":1,"c":[0,0,0,0],"cp":[0,0,0,0],"j":{"12":0,"13":0,"14":0,"23":0,"24":0,"34":2}}"#).unwrap();
        assert_eq!(back.j.get(4, 3), -2.0);
        assert_eq!(back.to_array()[14], 2.0);
    }

    #[test]
    fn derived_examples() {
        let d = derived(&ChargeSet::default());
        assert_eq!((d.a, d.l_sq), (0.0, 0.0));

        let mut cs = ChargeSet::default();
        cs.j.j12 = 1.0;
        let d = derived(&cs);
        assert_eq!(d.j_hat, [0.0, 0.0, 1.0]);
        assert_eq!((d.l_sq, d.a), (2.0, 1.0));

        let mut cs = ChargeSet::default();
        cs.c[3] = 3.0;
        let d = derived(&cs);
        assert_eq!((d.a, d.l_sq), (9.0, 0.0));

        let mut cs = ChargeSet::default();
        cs.j.j13 = 2.0;
        assert_eq!(derived(&cs).j_hat, [0.0, -2.0, 0.0]);
    }

    #[test]
    fn ads_charges_vanish() {
        let m = AdsExact {
            constants: ModelConstants::default(),
        };
        let cs = compute_charges(&m, &quick(), DerivativeMode::Auto).unwrap();
        assert!(cs.to_array().iter().all(|v| *v == 0.0));
        assert!(!cs.any_divergent());
    }

    #[test]
    fn radial_bump_energy() {
        let m = RadialBump::new(0.1, 4.0, ModelConstants::default()).unwrap();
        let cs = compute_charges(&m, &quick(), DerivativeMode::Auto).unwrap();
        let expected = 15.0 * PI * 0.1 / 128.0;
        assert!((cs.e0 - expected).abs() < 1e-6 * expected, "{} vs {expected}", cs.e0);
        for v in &cs.to_array()[1..] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn energy_scales_with_kappa() {
        let kappa = 0.5;
        let k = ModelConstants::new(kappa).unwrap();
        let m = RadialBump::new(0.2, 4.0, k).unwrap();
        let mut q = quick();
        q.radii = q.radii.iter().map(|r| r / kappa).collect();
        let cs = compute_charges(&m, &q, DerivativeMode::Auto).unwrap();
        let expected = 15.0 * PI * 0.2 / (128.0 * kappa * kappa);
        assert!((cs.e0 - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn offdiag_momentum_selects_one_charge() {
        let q_amp = 0.3;
        let m = OffdiagMomentum::new(q_amp, 2, 4.0, Profile::SinTheta, ModelConstants::default()).unwrap();
        let cs = compute_charges(&m, &quick(), DerivativeMode::Auto).unwrap();
        let expected = -3.0 * PI * q_amp / 256.0;
        assert!((cs.cp[3] - expected).abs() < 1e-6 * expected.abs(), "{}", cs.cp[3]);
        for (n, v) in cs.to_array().iter().enumerate() {
            if n != 8 {
                assert!(v.abs() < 1e-10, "{}: {v}", CHARGE_NAMES[n]);
            }
        }
    }

    #[test]
    fn slow_decay_is_flagged() {
        let m = RadialBump::new(0.1, 3.0, ModelConstants::default()).unwrap();
        let cs = compute_charges(&m, &quick(), DerivativeMode::Auto).unwrap();
        assert!(cs.diagnostics[0].divergent);
        assert!(cs.any_divergent());
    }
}

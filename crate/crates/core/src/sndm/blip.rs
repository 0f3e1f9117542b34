//! Blip functions and the H-transform.
//!
//! A blip `γ*(y, l̄_m, ā_m; ψ)` maps outcome quantiles under "treat as
//! observed through `m`, then stop" onto quantiles under "stop from `m`".
//! Two closed-form families are provided:
//!
//! * additive: `y + ψᵀ b_m(l̄_m, ā_m)`
//! * multiplicative: `y · exp(ψᵀ b_m(l̄_m, ā_m))`, defined for `y > 0`
//!
//! Every basis feature `b_m` carries a factor `a_m`, so the blip is the
//! identity whenever `a_m = 0`, and identically the identity iff `ψ = 0`.
//!
//! `H_K = γ*(Y, ...)`, `H_m = γ*(H_{m+1}, l̄_m, ā_m)` and `H = H_0`.

use serde::{Deserialize, Serialize};

use crate::data::{History, Trajectory};
use crate::design::Feature;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlipFamily {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlipSpec {
    pub family: BlipFamily,
    pub features: Vec<Feature>,
    #[serde(default)]
    pub psi: Vec<f64>,
}

impl BlipSpec {
    pub fn new(family: BlipFamily, features: Vec<Feature>, psi: Vec<f64>) -> Result<Self> {
        let spec = BlipSpec {
            family,
            features,
            psi,
        };
        spec.check()?;
        Ok(spec)
    }

    /// A family without parameter values; `psi` is set to zeros.
    pub fn family(family: BlipFamily, features: Vec<Feature>) -> Result<Self> {
        let d = features.len();
        BlipSpec::new(family, features, vec![0.0; d])
    }

    /// `(a_m, a_m a_{m-1}, a_m w_m)` with `w_m = l_m`.
    pub fn treatment_history_interaction(family: BlipFamily, psi: [f64; 3]) -> Self {
        BlipSpec {
            family,
            features: vec![
                Feature::a(0),
                Feature::product(vec![Feature::a(0), Feature::a(1)]),
                Feature::product(vec![Feature::a(0), Feature::l(0)]),
            ],
            psi: psi.to_vec(),
        }
    }

    /// The scalar family `y + ψ a_m`.
    pub fn constant_shift(psi: f64) -> Self {
        BlipSpec {
            family: BlipFamily::Additive,
            features: vec![Feature::a(0)],
            psi: vec![psi],
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidParameter("blip needs at least one feature".into()));
        }
        if self.psi.len() != self.features.len() {
            return Err(Error::InvalidParameter(format!(
                "ψ has dimension {} but the blip has {} features",
                self.psi.len(),
                self.features.len()
            )));
        }
        if let Some(f) = self.features.iter().find(|f| !f.has_current_treatment_factor()) {
            return Err(Error::InvalidParameter(format!(
                "blip feature {} lacks a factor of the current treatment",
                f.describe()
            )));
        }
        if self.psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("ψ must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn with_psi(&self, psi: &[f64]) -> Self {
        BlipSpec {
            family: self.family,
            features: self.features.clone(),
            psi: psi.to_vec(),
        }
    }

    /// `b_m(l̄_m, ā_m)`.
    pub fn basis(&self, m: usize, l: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.features.iter().map(|f| f.eval(m, l, a)).collect()
    }

    /// `b_m` evaluated with `a_m = 1`, the default estimating-function basis.
    pub fn unit_basis(&self, m: usize, l: &[f64], a_prev: &[f64]) -> Result<Vec<f64>> {
        self.features
            .iter()
            .map(|f| f.eval_with_unit_treatment(m, l, a_prev))
            .collect()
    }

    fn index_of(&self, basis: &[f64]) -> f64 {
        self.psi.iter().zip(basis).map(|(p, b)| p * b).sum()
    }

    /// `ψᵀ b_m` at a history with current treatment `a_m`.
    pub fn index(&self, hist: &History<'_>, a_m: f64) -> Result<f64> {
        let a = with_current(hist.a_bar_prev, a_m);
        Ok(self.index_of(&self.basis(hist.m, hist.l_bar, &a)?))
    }

    pub fn apply_index(&self, y: f64, index: f64) -> f64 {
        match self.family {
            BlipFamily::Additive => y + index,
            BlipFamily::Multiplicative => y * index.exp(),
        }
    }

    pub fn invert_index(&self, u: f64, index: f64) -> f64 {
        match self.family {
            BlipFamily::Additive => u - index,
            BlipFamily::Multiplicative => u * (-index).exp(),
        }
    }

    /// `∂γ*/∂y`.
    pub fn slope_of_index(&self, index: f64) -> f64 {
        match self.family {
            BlipFamily::Additive => 1.0,
            BlipFamily::Multiplicative => index.exp(),
        }
    }
}

fn with_current(a_prev: &[f64], a_m: f64) -> Vec<f64> {
    let mut a = Vec::with_capacity(a_prev.len() + 1);
    a.extend_from_slice(a_prev);
    a.push(a_m);
    a
}

/// `γ*(y, l̄_m, ā_m; ψ)`.
pub fn blip(spec: &BlipSpec, y: f64, hist: &History<'_>, a_m: f64) -> Result<f64> {
    Ok(spec.apply_index(y, spec.index(hist, a_m)?))
}

/// The inverse of [`blip`] in its first argument.
pub fn blip_inverse(spec: &BlipSpec, u: f64, hist: &History<'_>, a_m: f64) -> Result<f64> {
    Ok(spec.invert_index(u, spec.index(hist, a_m)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HTransformResult {
    /// `H_m` for `m = 0..=K`.
    pub h_per_occasion: Vec<f64>,
    /// `H = H_0`.
    pub h: f64,
    /// `∂H/∂Y`.
    pub jacobian: f64,
}

/// Per-occasion blip indices `ψᵀ b_m`, evaluated on history prefixes.
pub fn blip_indices(spec: &BlipSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let k = traj.a.len() - 1;
    (0..=k)
        .map(|m| Ok(spec.index_of(&spec.basis(m, &traj.l[..=m], &traj.a[..=m])?)))
        .collect()
}

fn check_domain(spec: &BlipSpec, v: f64, what: &str) -> Result<()> {
    if spec.family == BlipFamily::Multiplicative && !(v > 0.0) {
        return Err(Error::Contract(format!(
            "multiplicative blips need {what} > 0, got {v}"
        )));
    }
    Ok(())
}

/// Blips `Y` down through occasions `K, ..., 0`.
pub fn compute_h(spec: &BlipSpec, traj: &Trajectory) -> Result<HTransformResult> {
    check_domain(spec, traj.y, "Y")?;
    let idx = blip_indices(spec, traj)?;
    Ok(h_from_indices(spec, traj.y, &idx))
}

pub fn h_from_indices(spec: &BlipSpec, y: f64, idx: &[f64]) -> HTransformResult {
    let mut h = vec![0.0; idx.len()];
    let mut cur = y;
    let mut jac = 1.0;
    for m in (0..idx.len()).rev() {
        jac *= spec.slope_of_index(idx[m]);
        cur = spec.apply_index(cur, idx[m]);
        h[m] = cur;
    }
    HTransformResult {
        h: h[0],
        h_per_occasion: h,
        jacobian: jac,
    }
}

/// `Y = h⁻¹(u, l̄_K, ā_K)`: undoes the blips from occasion 0 up to `K`.
pub fn h_inverse(spec: &BlipSpec, u: f64, l_bar: &[f64], a_bar: &[f64]) -> Result<f64> {
    if l_bar.len() != a_bar.len() || l_bar.is_empty() {
        return Err(Error::InvalidParameter(
            "covariate and treatment histories must both cover occasions 0..=K".into(),
        ));
    }
    check_domain(spec, u, "H")?;
    let mut cur = u;
    for m in 0..a_bar.len() {
        let b = spec.basis(m, &l_bar[..=m], &a_bar[..=m])?;
        cur = spec.invert_index(cur, spec.index_of(&b));
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq16(psi: [f64; 3]) -> BlipSpec {
        BlipSpec::treatment_history_interaction(BlipFamily::Additive, psi)
    }

    #[test]
    fn zero_psi_is_identity() {
        let s = eq16([0.0; 3]);
        let l = [0.3, 1.0];
        let h = History::new(1, &l, &[1.0]);
        assert_eq!(blip(&s, 2.5, &h, 1.0).unwrap(), 2.5);
        assert_eq!(blip_inverse(&s, 2.5, &h, 1.0).unwrap(), 2.5);
        let t = Trajectory::new(vec![0.3, 1.0], vec![1.0, 1.0], 2.5);
        let r = compute_h(&s, &t).unwrap();
        assert_eq!(r.h, 2.5);
        assert_eq!(r.jacobian, 1.0);
    }

    #[test]
    fn untreated_occasion_is_identity() {
        let s = eq16([2.0, 3.0, 4.0]);
        let l = [1.0, 1.0];
        let h = History::new(1, &l, &[1.0]);
        assert_eq!(blip(&s, 0.7, &h, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn worked_examples_nine_and_eleven() {
        let s = eq16([2.0, 3.0, 4.0]);
        let l = [0.0, 1.0];
        let h = History::new(1, &l, &[1.0]);
        assert_eq!(blip(&s, 0.0, &h, 1.0).unwrap(), 9.0);
        // K = 1 with a = (1, 1), w = (0, 1), Y = 0.
        let t = Trajectory::new(vec![0.0, 1.0], vec![1.0, 1.0], 0.0);
        let r = compute_h(&s, &t).unwrap();
        assert_eq!(r.h_per_occasion[1], 9.0);
        assert_eq!(r.h, 11.0);
        assert_eq!(r.jacobian, 1.0);
    }

    #[test]
    fn additive_and_multiplicative_inverses() {
        let s = eq16([2.0, 3.0, 4.0]);
        let l = [0.0, 1.0];
        let h = History::new(1, &l, &[1.0]);
        assert_eq!(blip_inverse(&s, 9.0, &h, 1.0).unwrap(), 0.0);
        let m = BlipSpec::new(BlipFamily::Multiplicative, vec![Feature::a(0)], vec![2f64.ln()]).unwrap();
        let h0 = History::new(0, &l[..1], &[]);
        assert!((blip_inverse(&m, 6.0, &h0, 1.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_interaction_inverse_is_history_free() {
        let s = BlipSpec::new(
            BlipFamily::Additive,
            vec![Feature::a(0), Feature::product(vec![Feature::a(0), Feature::a(1)])],
            vec![2.0, 3.0],
        )
        .unwrap();
        let a = [1.0, 1.0, 0.0];
        let u = 10.0;
        let expected = u - (2.0 + (2.0 + 3.0));
        for l in [[0.0, 0.0, 0.0], [1.0, 0.0, 1.0], [5.0, -2.0, 3.0]] {
            assert_eq!(h_inverse(&s, u, &l, &a).unwrap(), expected);
        }
    }

    #[test]
    fn feature_without_treatment_factor_rejected() {
        assert!(BlipSpec::new(BlipFamily::Additive, vec![Feature::l(0)], vec![1.0]).is_err());
        assert!(BlipSpec::new(BlipFamily::Additive, vec![Feature::a(0)], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn multiplicative_requires_positive_outcome() {
        let m = BlipSpec::new(BlipFamily::Multiplicative, vec![Feature::a(0)], vec![0.5]).unwrap();
        let t = Trajectory::new(vec![0.0], vec![1.0], -1.0);
        assert!(matches!(compute_h(&m, &t), Err(Error::Contract(_))));
        let ok = Trajectory::new(vec![0.0], vec![1.0], 2.0);
        let r = compute_h(&m, &ok).unwrap();
        assert!((r.jacobian - 0.5f64.exp()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn traj(k: usize) -> impl Strategy<Value = Trajectory> {
            (
                proptest::collection::vec(-3.0f64..3.0, k + 1),
                proptest::collection::vec(0u8..2, k + 1),
                0.05f64..20.0,
            )
                .prop_map(|(l, a, y)| Trajectory::new(l, a.into_iter().map(f64::from).collect(), y))
        }

        proptest! {
            #[test]
            fn round_trip_additive(t in traj(3), psi in proptest::array::uniform3(-4.0f64..4.0)) {
                let s = eq16(psi);
                let r = compute_h(&s, &t).unwrap();
                let back = h_inverse(&s, r.h, &t.l, &t.a).unwrap();
                prop_assert!((back - t.y).abs() < 1e-12 * t.y.abs().max(1.0));
                prop_assert_eq!(r.jacobian, 1.0);
            }

            #[test]
            fn round_trip_multiplicative_and_monotone(t in traj(2), psi in proptest::array::uniform3(-1.0f64..1.0)) {
                let s = BlipSpec::treatment_history_interaction(BlipFamily::Multiplicative, psi);
                let r = compute_h(&s, &t).unwrap();
                prop_assert!(r.jacobian > 0.0);
                let back = h_inverse(&s, r.h, &t.l, &t.a).unwrap();
                prop_assert!((back - t.y).abs() < 1e-12 * t.y.abs().max(1.0));
                let bigger = Trajectory::new(t.l.clone(), t.a.clone(), t.y + 0.5);
                prop_assert!(compute_h(&s, &bigger).unwrap().h > r.h);
            }

            #[test]
            fn closed_form_matches_recursion(t in traj(3), psi in proptest::array::uniform3(-4.0f64..4.0)) {
                let s = eq16(psi);
                let r = compute_h(&s, &t).unwrap();
                let mut closed = t.y;
                for m in 0..t.a.len() {
                    let prev = if m == 0 { 0.0 } else { t.a[m - 1] };
                    closed += psi[0] * t.a[m] + psi[1] * t.a[m] * prev + psi[2] * t.a[m] * t.l[m];
                }
                prop_assert!((r.h - closed).abs() < 1e-12 * closed.abs().max(1.0));
            }
        }
    }
}

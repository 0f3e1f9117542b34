//! Treatment splits and inverse weights for the `Z` components.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Kind};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::glm::{fit_linear, fit_logistic, design_matrix, expit};
use crate::simulate::TreatmentLaw;
use crate::stats::normal_pdf;

/// Positivity floor for the probability of a discrete treatment. Densities
/// of continuous treatments only need to be positive and finite.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// A treatment whose direct effect is studied.
    P,
    /// A treatment held fixed by intervention.
    Z,
}

/// Assignment of each occasion's treatment to `A_P` or `A_Z`.
///
/// Each occasion carries one treatment column, so an occasion is wholly
/// `P` or wholly `Z`; `A_{Pm}` or `A_{Zm}` is empty at the other role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSchema {
    pub roles: Vec<Role>,
}

impl SplitSchema {
    pub fn new(roles: Vec<Role>) -> Self {
        SplitSchema { roles }
    }

    /// `A_0 = A_P`, `A_1 = A_Z`.
    pub fn two_occasion() -> Self {
        SplitSchema::new(vec![Role::P, Role::Z])
    }

    /// Every occasion `P`: no component is held fixed.
    pub fn all_p(occasions: usize) -> Self {
        SplitSchema::new(vec![Role::P; occasions])
    }

    pub fn check(&self, dataset: &Dataset) -> Result<()> {
        if self.roles.len() != dataset.k() + 1 {
            return Err(Error::InvalidParameter(format!(
                "split has {} occasions, data has {}",
                self.roles.len(),
                dataset.k() + 1
            )));
        }
        Ok(())
    }

    pub fn is_p(&self, m: usize) -> bool {
        self.roles[m] == Role::P
    }

    pub fn z_occasions(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles.iter().enumerate().filter(|(_, r)| **r == Role::Z).map(|(m, _)| m)
    }
}

/// Law of a `Z` treatment given `(l̄_k, ā_{k-1})`.
#[derive(Debug, Clone, PartialEq)]
pub enum TreatmentDensity {
    /// Known by design.
    Known(TreatmentLaw),
    /// Fit by maximum likelihood on a design over `(l̄_k, ā_{k-1})`:
    /// logistic for binary treatments, normal-linear otherwise.
    Estimated(DesignSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    KnownByDesign,
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpwWeights {
    /// `W_1 = f(A_1 | L̄_1, A_0)` per subject.
    pub w1_per_subject: Vec<f64>,
    /// `W_m = ∏_{k ≥ m, k ∈ Z} f(A_k | ...)` for `m = 0..=K+1` per subject;
    /// `W_{K+1} = 1`.
    pub wm_per_subject: Vec<Vec<f64>>,
    pub alpha_source: AlphaSource,
}

impl IpwWeights {
    /// `models[k]` gives the law of `A_k` for every `Z` occasion `k`.
    pub fn new(dataset: &Dataset, split: &SplitSchema, models: &[Option<TreatmentDensity>]) -> Result<Self> {
        split.check(dataset)?;
        let occ = dataset.k() + 1;
        if models.len() != occ {
            return Err(Error::InvalidParameter(format!("need {occ} treatment-law slots")));
        }
        let mut factors = vec![vec![1.0; occ]; dataset.n()];
        let mut estimated = false;
        for k in split.z_occasions() {
            let model = models[k]
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("Z occasion {k} has no treatment law")))?;
            estimated |= matches!(model, TreatmentDensity::Estimated(_));
            let floor = if dataset.schema.treatments[k].is_discrete() { WEIGHT_FLOOR } else { f64::MIN_POSITIVE };
            for (i, f) in densities(dataset, k, model)?.into_iter().enumerate() {
                if !(f.is_finite() && f >= floor) {
                    return Err(Error::Positivity(format!("subject {i}: f(A_{k} | past) = {f:e} is below {floor:e}")));
                }
                factors[i][k] = f;
            }
        }
        let mut wm = Vec::with_capacity(dataset.n());
        for (i, f) in factors.iter().enumerate() {
            let mut w = vec![1.0; occ + 1];
            for m in (0..occ).rev() {
                w[m] = w[m + 1] * f[m];
            }
            if let Some(m) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Positivity(format!("subject {i}: W_{m} = {:e} is not positive", w[m])));
            }
            wm.push(w);
        }
        let w1 = wm.iter().map(|w| if occ > 1 { w[1] } else { 1.0 }).collect();
        Ok(IpwWeights {
            w1_per_subject: w1,
            wm_per_subject: wm,
            alpha_source: if estimated { AlphaSource::Estimated } else { AlphaSource::KnownByDesign },
        })
    }
}

/// `f(A_k | l̄_k, ā_{k-1})` for every subject.
pub fn densities(dataset: &Dataset, k: usize, model: &TreatmentDensity) -> Result<Vec<f64>> {
    let a = dataset.treatment(k);
    match model {
        TreatmentDensity::Known(law) => Ok(dataset
            .rows
            .iter()
            .map(|t| law.density(t.a[k], t.l[k], if k == 0 { 0.0 } else { t.a[k - 1] }))
            .collect()),
        TreatmentDensity::Estimated(design) => {
            let rows = dataset
                .rows
                .iter()
                .map(|t| design.row(k, &t.l[..=k], &t.a[..k]))
                .collect::<Result<Vec<_>>>()?;
            let x = design_matrix(&rows)?;
            if dataset.schema.treatments[k] == Kind::Binary {
                let fit = fit_logistic(&x, &a)?;
                Ok(rows
                    .iter()
                    .zip(&a)
                    .map(|(r, &ak)| {
                        let p = expit(fit.linear_predictor(r));
                        if ak == 1.0 { p } else { 1.0 - p }
                    })
                    .collect())
            } else {
                let fit = fit_linear(&x, &a)?;
                let sd = fit.dispersion.sqrt();
                Ok(rows
                    .iter()
                    .zip(&a)
                    .map(|(r, &ak)| normal_pdf((ak - fit.linear_predictor(r)) / sd) / sd)
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Feature;
    use crate::simulate::{simulate, SequentialConfig};

    fn a1_law() -> TreatmentLaw {
        SequentialConfig::null_paradox_default().treatments[1].clone()
    }

    #[test]
    fn weights_multiply_from_the_right() {
        let cfg = SequentialConfig::null_paradox_default();
        let d = simulate(&cfg, 200, 1).unwrap();
        let w = IpwWeights::new(&d, &SplitSchema::two_occasion(), &[None, Some(TreatmentDensity::Known(a1_law()))]).unwrap();
        for (i, t) in d.rows.iter().enumerate() {
            let f = a1_law().density(t.a[1], t.l[1], t.a[0]);
            assert_eq!(w.w1_per_subject[i], f);
            assert_eq!(w.wm_per_subject[i], vec![f, f, 1.0]);
        }
        assert_eq!(w.alpha_source, AlphaSource::KnownByDesign);
    }

    #[test]
    fn density_ratio_has_unit_mean() {
        // E[f(A_1 | L, A_0) / W_1] = 1 trivially; the informative check is
        // E[φ(A_1) / W_1] = ∫ φ = 1.
        let cfg = SequentialConfig::null_paradox_default();
        let d = simulate(&cfg, 20_000, 2).unwrap();
        let w = IpwWeights::new(&d, &SplitSchema::two_occasion(), &[None, Some(TreatmentDensity::Known(a1_law()))]).unwrap();
        let r: Vec<f64> = d.rows.iter().zip(&w.w1_per_subject).map(|(t, w)| normal_pdf(t.a[1]) / w).collect();
        let m = crate::stats::mean(&r);
        let se = (crate::stats::variance(&r) / r.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn estimated_law_is_close_to_the_design() {
        let cfg = SequentialConfig::null_paradox_default();
        let d = simulate(&cfg, 5000, 3).unwrap();
        let design = DesignSpec::new(vec![Feature::Intercept, Feature::a(1), Feature::l(0)]).unwrap();
        let est = densities(&d, 1, &TreatmentDensity::Estimated(design)).unwrap();
        let known = densities(&d, 1, &TreatmentDensity::Known(a1_law())).unwrap();
        let worst = est.iter().zip(&known).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.5);
    }

    #[test]
    fn tiny_weights_are_errors() {
        let split = SplitSchema::two_occasion();
        let d = simulate(&SequentialConfig::binary_toy(0.0, 1.0), 100, 4).unwrap();
        let near_certain = TreatmentLaw::Bernoulli {
            intercept: 20.0,
            l: 0.0,
            prev_a: 0.0,
        };
        let r = IpwWeights::new(&d, &split, &[None, Some(TreatmentDensity::Known(near_certain))]);
        assert!(matches!(r, Err(Error::Positivity(_))));

        let d = simulate(&SequentialConfig::null_paradox_default(), 100, 4).unwrap();
        let far = |intercept| TreatmentLaw::Normal {
            intercept,
            l: 0.0,
            prev_a: 0.0,
            sd: 1.0,
        };
        // A small density is a large but valid weight; an underflowed one is not.
        assert!(IpwWeights::new(&d, &split, &[None, Some(TreatmentDensity::Known(far(6.0)))]).is_ok());
        let r = IpwWeights::new(&d, &split, &[None, Some(TreatmentDensity::Known(far(60.0)))]);
        assert!(matches!(r, Err(Error::Positivity(_))));
    }
}

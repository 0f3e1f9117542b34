//! Maximum likelihood for a structural nested distribution model.
//!
//! The likelihood is
//! `∏_i |∂H_i/∂Y_i| f(H_i(ψ); η) ∏_m f(l_{m,i} | l̄_{m-1,i}, ā_{m-1,i}, H_i(ψ); φ)`.
//! Treatment laws factor out and are not modelled. For fixed `ψ`, the
//! normal `η` and the GLM `φ` have closed-form or IRLS maximisers, so the
//! fit maximises the profile likelihood over `ψ` only.

use nalgebra::DMatrix;

use crate::data::{Dataset, Kind};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::glm::{expit, fit_linear, fit_logistic, TestReport, DEFAULT_LEVEL};
use crate::optim::bfgs;
use crate::rng::SimRng;
use crate::simulate::scenario::{draw_bernoulli, draw_normal};
use crate::sndm::blip::{h_from_indices, BlipFamily, BlipSpec};

/// Parametric family for the density of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HDensity {
    #[default]
    Normal,
}

#[derive(Debug, Clone)]
pub struct MleSpec {
    /// Blip family; its `psi` is the starting value.
    pub blip: BlipSpec,
    pub h_density: HDensity,
    /// Regressors for `L_m` on `(l̄_{m-1}, ā_{m-1})`, with `H` appended as
    /// the last column. `None` marks an absent covariate.
    pub covariates: Vec<Option<DesignSpec>>,
    /// Keep the `∂H/∂Y` factor; off only for diagnostics.
    pub include_jacobian: bool,
}

impl MleSpec {
    pub fn new(blip: BlipSpec, covariates: Vec<Option<DesignSpec>>) -> Self {
        MleSpec {
            blip,
            h_density: HDensity::Normal,
            covariates,
            include_jacobian: true,
        }
    }
}

/// A fitted law of `L_m` given its past and `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum HCovariateFit {
    Absent,
    Logistic { design: DesignSpec, coef: Vec<f64> },
    Normal { design: DesignSpec, coef: Vec<f64>, sd: f64 },
}

impl HCovariateFit {
    fn predictor(design: &DesignSpec, coef: &[f64], m: usize, l_prev: &[f64], a_prev: &[f64], h: f64) -> Result<f64> {
        let row = design.row(m, l_prev, a_prev)?;
        let (last, head) = coef.split_last().expect("H coefficient");
        Ok(head.iter().zip(&row).map(|(c, x)| c * x).sum::<f64>() + last * h)
    }

    pub fn sample(&self, m: usize, l_prev: &[f64], a_prev: &[f64], h: f64, rng: &mut SimRng) -> Result<f64> {
        Ok(match self {
            HCovariateFit::Absent => 0.0,
            HCovariateFit::Logistic { design, coef } => draw_bernoulli(rng, expit(Self::predictor(design, coef, m, l_prev, a_prev, h)?)),
            HCovariateFit::Normal { design, coef, sd } => draw_normal(rng, Self::predictor(design, coef, m, l_prev, a_prev, h)?, *sd),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SndmMle {
    pub psi_hat: Vec<f64>,
    /// Mean and variance of the normal `f(h; η)`.
    pub eta_hat: (f64, f64),
    pub phi_hat: Vec<HCovariateFit>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: u64,
}

struct Profile<'a> {
    dataset: &'a Dataset,
    spec: &'a MleSpec,
    bases: Vec<Vec<Vec<f64>>>,
    designs: Vec<Option<DMatrix<f64>>>,
}

struct ProfileFit {
    loglik: f64,
    eta: (f64, f64),
    phi: Vec<HCovariateFit>,
}

impl<'a> Profile<'a> {
    fn new(dataset: &'a Dataset, spec: &'a MleSpec) -> Result<Self> {
        spec.blip.check()?;
        let occ = dataset.k() + 1;
        if spec.covariates.len() != occ {
            return Err(Error::InvalidParameter(format!("need {occ} covariate models")));
        }
        if spec.blip.family == BlipFamily::Multiplicative && dataset.rows.iter().any(|t| !(t.y > 0.0)) {
            return Err(Error::Contract("multiplicative blips need Y > 0".into()));
        }
        let bases = dataset
            .rows
            .iter()
            .map(|t| (0..occ).map(|m| spec.blip.basis(m, &t.l[..=m], &t.a[..=m])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut designs = Vec::with_capacity(occ);
        for (m, d) in spec.covariates.iter().enumerate() {
            designs.push(match d {
                None => None,
                Some(design) => {
                    let n = dataset.n();
                    let p = design.width();
                    let mut x = DMatrix::zeros(n, p + 1);
                    for (i, t) in dataset.rows.iter().enumerate() {
                        for (j, v) in design.row(m, &t.l[..m], &t.a[..m])?.into_iter().enumerate() {
                            x[(i, j)] = v;
                        }
                    }
                    Some(x)
                }
            });
        }
        Ok(Profile {
            dataset,
            spec,
            bases,
            designs,
        })
    }

    fn fit(&self, psi: &[f64]) -> Result<ProfileFit> {
        if psi.len() != self.spec.blip.dim() || psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("ψ has the wrong length or is not finite".into()));
        }
        let blip = self.spec.blip.with_psi(psi);
        let n = self.dataset.n();
        let mut h = Vec::with_capacity(n);
        let mut log_jac = 0.0;
        for (t, b) in self.dataset.rows.iter().zip(&self.bases) {
            let idx: Vec<f64> = b.iter().map(|bm| bm.iter().zip(psi).map(|(x, c)| x * c).sum()).collect();
            let r = h_from_indices(&blip, t.y, &idx);
            log_jac += r.jacobian.ln();
            h.push(r.h);
        }
        let nf = n as f64;
        let mean = h.iter().sum::<f64>() / nf;
        let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
        if !(var > 1e-12) {
            return Err(Error::Unbounded(format!("Var H(ψ) = {var:e} at ψ = {psi:?}")));
        }
        let mut loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
        if self.spec.include_jacobian {
            loglik += log_jac;
        }
        let mut phi = Vec::with_capacity(self.designs.len());
        for (m, x) in self.designs.iter().enumerate() {
            let Some(x) = x else {
                phi.push(HCovariateFit::Absent);
                continue;
            };
            let mut x = x.clone();
            let last = x.ncols() - 1;
            for (i, v) in h.iter().enumerate() {
                x[(i, last)] = *v;
            }
            let design = self.spec.covariates[m].clone().expect("design present");
            let y = self.dataset.covariate(m);
            if self.dataset.schema.covariates[m] == Kind::Binary {
                let f = fit_logistic(&x, &y)?;
                loglik += f.loglik;
                phi.push(HCovariateFit::Logistic { design, coef: f.coef });
            } else {
                let f = fit_linear(&x, &y)?;
                let rss: f64 = (f.response() - f.fitted()).iter().map(|r| r * r).sum();
                let s2 = rss / nf;
                if !(s2 > 1e-300) {
                    return Err(Error::Unbounded(format!("L_{m} is fit exactly at ψ = {psi:?}")));
                }
                loglik += -0.5 * nf * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
                phi.push(HCovariateFit::Normal {
                    design,
                    coef: f.coef,
                    sd: s2.sqrt(),
                });
            }
        }
        Ok(ProfileFit {
            loglik,
            eta: (mean, var),
            phi,
        })
    }
}

/// Profile log-likelihood at `ψ`.
pub fn sndm_profile_loglik(dataset: &Dataset, spec: &MleSpec, psi: &[f64]) -> Result<f64> {
    Ok(Profile::new(dataset, spec)?.fit(psi)?.loglik)
}

/// The joint maximiser over `(ψ, η, φ)`, starting from `spec.blip.psi`.
pub fn sndm_mle(dataset: &Dataset, spec: &MleSpec) -> Result<SndmMle> {
    let profile = Profile::new(dataset, spec)?;
    let start = spec.blip.psi.clone();
    let scale = dataset.n() as f64;
    let m = bfgs(|psi| Ok(-profile.fit(psi)?.loglik / scale), &start, 1e-8, 500)?;
    let best = profile.fit(&m.x)?;
    Ok(SndmMle {
        psi_hat: m.x,
        eta_hat: best.eta,
        phi_hat: best.phi,
        log_likelihood: best.loglik,
        converged: m.converged,
        iterations: m.iterations,
    })
}

/// Likelihood-ratio test of `ψ = 0`.
pub fn sndm_lr_test(dataset: &Dataset, spec: &MleSpec) -> Result<(SndmMle, TestReport)> {
    let fit = sndm_mle(dataset, spec)?;
    let null = sndm_profile_loglik(dataset, spec, &vec![0.0; spec.blip.dim()])?;
    let stat = (2.0 * (fit.log_likelihood - null)).max(0.0);
    let report = TestReport::chi_square(stat, spec.blip.dim(), DEFAULT_LEVEL);
    Ok((fit, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Feature;
    use crate::simulate::sndm_scenario::{HCovariateLaw, HLaw};
    use crate::simulate::{simulate, simulate_with_hidden, SndmScenario};

    fn covariate_models() -> Vec<Option<DesignSpec>> {
        vec![
            Some(DesignSpec::intercept()),
            Some(DesignSpec::new(vec![Feature::Intercept, Feature::l(1), Feature::a(1)]).unwrap()),
        ]
    }

    #[test]
    fn eta_is_the_normal_mle_of_h() {
        let s = SndmScenario::recovery_default(1.0);
        let (d, _) = simulate_with_hidden(&s, 800, 3).unwrap();
        let spec = MleSpec::new(s.blip.clone(), covariate_models());
        let p = Profile::new(&d, &spec).unwrap().fit(&[1.0]).unwrap();
        let h: Vec<f64> = d.rows.iter().map(|t| crate::sndm::compute_h(&s.blip, t).unwrap().h).collect();
        let mean = crate::stats::mean(&h);
        let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / h.len() as f64;
        assert!((p.eta.0 - mean).abs() < 1e-6);
        assert!((p.eta.1 - var).abs() < 1e-6);
    }

    #[test]
    fn recovers_the_shift() {
        let s = SndmScenario::recovery_default(1.0);
        let d = simulate(&s, 3000, 11).unwrap();
        let spec = MleSpec::new(s.blip.with_psi(&[0.0]), covariate_models());
        let fit = sndm_mle(&d, &spec).unwrap();
        assert!((fit.psi_hat[0] - 1.0).abs() < 0.2, "{:?}", fit.psi_hat);
        assert!(fit.log_likelihood >= sndm_profile_loglik(&d, &spec, &[1.0]).unwrap() - 1e-6);
        assert_eq!(fit.phi_hat.len(), 2);
        let (_, lr) = sndm_lr_test(&d, &spec).unwrap();
        assert!(lr.reject);
    }

    #[test]
    fn collapsed_variance_is_unbounded() {
        let s = SndmScenario::recovery_default(0.0);
        let mut d = simulate(&s, 50, 1).unwrap();
        for t in &mut d.rows {
            t.y = 2.0 * t.a[0] + 2.0 * t.a[1];
        }
        let spec = MleSpec::new(s.blip.clone(), covariate_models());
        let r = Profile::new(&d, &spec).unwrap().fit(&[-2.0]);
        assert!(matches!(r, Err(Error::Unbounded(_))));
    }

    fn multiplicative_scenario() -> SndmScenario {
        let mut s = SndmScenario::recovery_default(0.0);
        s.h = HLaw::Normal { mean: 5.0, sd: 1.0 };
        s.covariates[0] = HCovariateLaw::Bernoulli {
            intercept: -2.0,
            h: 0.5,
            prev_l: 0.0,
            prev_a: 0.0,
        };
        s.covariates[1] = HCovariateLaw::Bernoulli {
            intercept: -2.3,
            h: 0.5,
            prev_l: 0.5,
            prev_a: -0.5,
        };
        s.blip = BlipSpec::new(BlipFamily::Multiplicative, vec![Feature::a(0)], vec![0.5]).unwrap();
        s
    }

    #[test]
    fn jacobian_term_moves_the_maximiser() {
        let s = multiplicative_scenario();
        let d = simulate(&s, 4000, 17).unwrap();
        let mut spec = MleSpec::new(s.blip.with_psi(&[0.0]), covariate_models());
        let with = sndm_mle(&d, &spec).unwrap();
        spec.include_jacobian = false;
        let without = sndm_mle(&d, &spec).unwrap();
        assert!((with.psi_hat[0] - 0.5).abs() < 0.05, "{:?}", with.psi_hat);
        assert!((with.psi_hat[0] - without.psi_hat[0]).abs() > 0.05, "{:?} vs {:?}", with.psi_hat, without.psi_hat);
    }

    #[test]
    fn fitted_covariate_laws_sample() {
        let s = SndmScenario::recovery_default(1.0);
        let d = simulate(&s, 2000, 4).unwrap();
        let spec = MleSpec::new(s.blip.clone(), covariate_models());
        let fit = sndm_mle(&d, &spec).unwrap();
        let mut rng = crate::rng::StreamKey::root(1).rng();
        let v = fit.phi_hat[1].sample(1, &[1.0], &[0.0], 0.3, &mut rng).unwrap();
        assert!(v == 0.0 || v == 1.0);
        assert_eq!(HCovariateFit::Absent.sample(0, &[], &[], 0.0, &mut rng).unwrap(), 0.0);
    }
}

//! Direct-effect SNDM estimation.
//!
//! 1. Fit the `A_Z` laws and form `W_m`.
//! 2. Fit the mean model `E[A_{Pm} | Ā_{m-1}, L̄_m] = d(α⁽⁰⁾ᵀQ_m)`.
//! 3. For each `ψ`, score-test `θ = 0` for the added term
//!    `θᵀ q*_m(H(ψ), ...) / W_{m+1}`, pooling the `P` occasions of a subject
//!    with a within-subject empirical covariance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, History, Kind};
use crate::design::DesignSpec;
use crate::direct_effect::weights::{AlphaSource, IpwWeights, SplitSchema, TreatmentDensity};
use crate::error::{Error, Result};
use crate::glm::{design_matrix, fit_linear, fit_logistic, spd_inverse, DEFAULT_LEVEL};
use crate::sndm::blip::{h_from_indices, BlipFamily, BlipSpec};
use crate::sndm::gest::{invert_score_test, GEstimate, ScoreSource};

/// `q*_m(H, history, future Z treatments)`.
pub type DeQStarFn = dyn Fn(f64, &History<'_>, &[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub enum DeQStar {
    /// `H · b_m(l̄_m, ā_{m-1}, a_{Pm} = 1)`.
    HTimesBasis,
    Custom { name: String, f: Arc<DeQStarFn> },
}

impl DeQStar {
    pub fn describe(&self) -> String {
        match self {
            DeQStar::HTimesBasis => "H * blip basis / W".into(),
            DeQStar::Custom { name, .. } => name.clone(),
        }
    }
}

#[derive(Clone)]
pub struct DeSndmSpec {
    /// Blip applied at `P` occasions only; the identity at `Z` occasions.
    pub blip: BlipSpec,
    /// `Q_m` over `(l̄_m, ā_{m-1})`; the link is logistic for binary `A_P`
    /// and the identity otherwise.
    pub mean_model: DesignSpec,
    pub qstar: DeQStar,
    pub grid_points: usize,
    pub level: f64,
}

impl DeSndmSpec {
    pub fn new(blip: BlipSpec, mean_model: DesignSpec) -> Self {
        DeSndmSpec {
            blip,
            mean_model,
            qstar: DeQStar::HTimesBasis,
            grid_points: 201,
            level: DEFAULT_LEVEL,
        }
    }

    /// `γ(y, a_{P0}) = y + ψ a_{P0}` with an intercept-only mean model.
    pub fn shift() -> Self {
        DeSndmSpec::new(BlipSpec::constant_shift(0.0), DesignSpec::intercept())
    }
}

impl std::fmt::Debug for DeSndmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeSndmSpec")
            .field("blip", &self.blip)
            .field("mean_model", &self.mean_model)
            .field("qstar", &self.qstar.describe())
            .finish()
    }
}

/// Blip indices with the `Z` occasions zeroed.
pub(crate) fn split_indices(blip: &BlipSpec, split: &SplitSchema, l: &[f64], a: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
    (0..a.len())
        .map(|m| {
            if !split.is_p(m) {
                return Ok(0.0);
            }
            let b = blip.basis(m, &l[..=m], &a[..=m])?;
            Ok(b.iter().zip(psi).map(|(x, p)| x * p).sum())
        })
        .collect()
}

/// `H(ψ)` under the direct-effect recursion.
pub fn direct_effect_h(blip: &BlipSpec, split: &SplitSchema, y: f64, l: &[f64], a: &[f64]) -> Result<f64> {
    let idx = split_indices(blip, split, l, a, &blip.psi)?;
    Ok(h_from_indices(blip, y, &idx).h)
}

struct Row {
    subject: usize,
    occasion: usize,
    x: Vec<f64>,
    resid: f64,
    weight: f64,
    unit: Vec<f64>,
    /// `W_{m+1}`.
    w_next: f64,
}

struct DeEstimator<'a> {
    dataset: &'a Dataset,
    split: &'a SplitSchema,
    spec: &'a DeSndmSpec,
    rows: Vec<Row>,
    /// Per-subject nuisance score `s_i`.
    nuisance: Vec<DVector<f64>>,
    info_inv: DMatrix<f64>,
}

impl<'a> DeEstimator<'a> {
    fn new(dataset: &'a Dataset, split: &'a SplitSchema, spec: &'a DeSndmSpec, az_models: &[Option<TreatmentDensity>]) -> Result<(Self, AlphaSource)> {
        spec.blip.check()?;
        split.check(dataset)?;
        if spec.blip.family == BlipFamily::Multiplicative && dataset.rows.iter().any(|t| !(t.y > 0.0)) {
            return Err(Error::Contract("multiplicative blips need Y > 0".into()));
        }
        let weights = IpwWeights::new(dataset, split, az_models)?;
        let p_occ: Vec<usize> = (0..=dataset.k()).filter(|&m| split.is_p(m)).collect();
        if p_occ.is_empty() {
            return Err(Error::InvalidParameter("split has no P occasion".into()));
        }
        let binary = p_occ.iter().all(|&m| dataset.schema.treatments[m] == Kind::Binary);
        let mut design_rows = Vec::new();
        let mut target = Vec::new();
        let mut who = Vec::new();
        for (i, t) in dataset.rows.iter().enumerate() {
            for &m in &p_occ {
                design_rows.push(spec.mean_model.row(m, &t.l[..=m], &t.a[..m])?);
                target.push(t.a[m]);
                who.push((i, m));
            }
        }
        let x = design_matrix(&design_rows)?;
        let fit = if binary { fit_logistic(&x, &target)? } else { fit_linear(&x, &target)? };
        let fitted = fit.fitted();
        let p = x.ncols();
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut nuisance = vec![DVector::<f64>::zeros(p); dataset.n()];
        let mut rows = Vec::with_capacity(target.len());
        for (r, ((i, m), xr)) in who.into_iter().zip(design_rows).enumerate() {
            let mu = fitted[r];
            let resid = target[r] - mu;
            let weight = if binary { mu * (1.0 - mu) } else { 1.0 };
            for j in 0..p {
                nuisance[i][j] += xr[j] * resid;
                for k in 0..p {
                    info[(j, k)] += weight * xr[j] * xr[k];
                }
            }
            let t = &dataset.rows[i];
            rows.push(Row {
                subject: i,
                occasion: m,
                unit: spec.blip.unit_basis(m, &t.l[..=m], &t.a[..m])?,
                x: xr,
                resid,
                weight,
                w_next: weights.wm_per_subject[i][m + 1],
            });
        }
        Ok((
            DeEstimator {
                dataset,
                split,
                spec,
                rows,
                nuisance,
                info_inv: spd_inverse(&info)?,
            },
            weights.alpha_source,
        ))
    }

    /// Projected per-subject scores `ũ_i`.
    fn scores(&self, psi: &[f64]) -> Result<Vec<DVector<f64>>> {
        let d = self.spec.blip.dim();
        if psi.len() != d {
            return Err(Error::InvalidParameter(format!("ψ has {} entries, blip has {d}", psi.len())));
        }
        let blip = self.spec.blip.with_psi(psi);
        let h: Vec<f64> = self
            .dataset
            .rows
            .iter()
            .map(|t| Ok(h_from_indices(&blip, t.y, &split_indices(&blip, self.split, &t.l, &t.a, psi)?).h))
            .collect::<Result<_>>()?;
        let p = self.info_inv.nrows();
        let mut u = vec![DVector::<f64>::zeros(d); self.dataset.n()];
        let mut cross = DMatrix::<f64>::zeros(d, p);
        for row in &self.rows {
            let i = row.subject;
            let z: Vec<f64> = match &self.spec.qstar {
                DeQStar::HTimesBasis => row.unit.iter().map(|b| h[i] * b / row.w_next).collect(),
                DeQStar::Custom { f, .. } => {
                    let t = &self.dataset.rows[i];
                    let m = row.occasion;
                    let future: Vec<f64> = (m..=self.dataset.k()).filter(|&k| !self.split.is_p(k)).map(|k| t.a[k]).collect();
                    let v = f(h[i], &t.history(m), &future);
                    if v.len() != d || v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidParameter("q* must return dim(ψ) finite values".into()));
                    }
                    v.into_iter().map(|x| x / row.w_next).collect()
                }
            };
            for j in 0..d {
                u[i][j] += z[j] * row.resid;
                for k in 0..p {
                    cross[(j, k)] += row.weight * z[j] * row.x[k];
                }
            }
        }
        let proj = cross * &self.info_inv;
        Ok(u.into_iter().zip(&self.nuisance).map(|(ui, si)| ui - &proj * si).collect())
    }

    fn pieces(&self, psi: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let scores = self.scores(psi)?;
        let d = self.spec.blip.dim();
        let mut total = DVector::zeros(d);
        let mut cov = DMatrix::zeros(d, d);
        for s in &scores {
            total += s;
            cov += s * s.transpose();
        }
        Ok((total, cov))
    }
}

impl ScoreSource for DeEstimator<'_> {
    fn dim(&self) -> usize {
        self.spec.blip.dim()
    }

    fn statistic(&self, psi: &[f64]) -> Result<f64> {
        let (u, v) = self.pieces(psi)?;
        if u.amax() == 0.0 {
            return Ok(0.0);
        }
        let inv = spd_inverse(&v).map_err(|_| Error::Degenerate("q* has zero empirical variance".into()))?;
        Ok((u.transpose() * inv * &u)[(0, 0)].max(0.0))
    }

    fn signed_score(&self, psi: f64) -> Result<f64> {
        let (u, v) = self.pieces(&[psi])?;
        if !(v[(0, 0)] > 0.0) {
            return Err(Error::Degenerate("q* has zero empirical variance".into()));
        }
        Ok(u[0] / v[(0, 0)].sqrt())
    }
}

/// `ψ̃` and the conservative confidence set for a direct-effect SNDM.
pub fn de_sndm_estimate(
    dataset: &Dataset,
    split: &SplitSchema,
    spec: &DeSndmSpec,
    az_models: &[Option<TreatmentDensity>],
    psi_box: &[(f64, f64)],
) -> Result<GEstimate> {
    let (est, source) = DeEstimator::new(dataset, split, spec, az_models)?;
    let mut g = invert_score_test(&est, psi_box, spec.grid_points, spec.level, spec.qstar.describe())?;
    if source == AlphaSource::Estimated {
        g.notes.insert(0, "conservative: A_Z law parameters estimated".into());
    }
    Ok(g)
}

/// Score-test p-value of a single `ψ`.
pub fn de_sndm_p_value(dataset: &Dataset, split: &SplitSchema, spec: &DeSndmSpec, az_models: &[Option<TreatmentDensity>], psi: &[f64]) -> Result<f64> {
    let (est, _) = DeEstimator::new(dataset, split, spec, az_models)?;
    Ok(crate::stats::chi_square_sf(est.statistic(psi)?, psi.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Feature;
    use crate::simulate::{simulate, SequentialConfig};
    use crate::sndm::{g_estimate, GEstimateConfig};

    fn z_law(cfg: &SequentialConfig) -> Vec<Option<TreatmentDensity>> {
        vec![None, Some(TreatmentDensity::Known(cfg.treatments[1].clone()))]
    }

    #[test]
    fn recovers_the_direct_effect() {
        let cfg = SequentialConfig::binary_toy(1.0, 1.0);
        let d = simulate(&cfg, 4000, 2).unwrap();
        let g = de_sndm_estimate(&d, &SplitSchema::two_occasion(), &DeSndmSpec::shift(), &z_law(&cfg), &[(-3.0, 1.0)]).unwrap();
        assert!((g.psi_hat[0] + 1.0).abs() < 0.2, "{:?}", g.psi_hat);
        assert!(g.accepts(&[-1.0]));
        assert!(!g.accepts(&[0.0]));
    }

    #[test]
    fn empty_z_reduces_to_g_estimation() {
        use crate::simulate::SndmScenario;
        let s = SndmScenario::recovery_default(1.0);
        let d = simulate(&s, 1500, 4).unwrap();
        let tm = DesignSpec::new(vec![Feature::Intercept, Feature::l(0), Feature::a(1)]).unwrap();
        let split = SplitSchema::all_p(2);
        let spec = DeSndmSpec::new(BlipSpec::constant_shift(0.0), tm.clone());
        let de = de_sndm_estimate(&d, &split, &spec, &[None, None], &[(-1.0, 3.0)]).unwrap();
        let g = g_estimate(&d, &BlipSpec::constant_shift(0.0), &GEstimateConfig::new(tm, vec![(-1.0, 3.0)])).unwrap();
        assert!((de.psi_hat[0] - g.psi_hat[0]).abs() < de.resolution[0]);
    }

    #[test]
    fn h_ignores_z_occasions() {
        let blip = BlipSpec::constant_shift(2.0);
        let split = SplitSchema::two_occasion();
        assert_eq!(direct_effect_h(&blip, &split, 1.0, &[0.0, 1.0], &[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(direct_effect_h(&blip, &split, 1.0, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 1.0);
    }
}

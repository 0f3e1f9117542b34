//! G-estimation of blip parameters by inverting the pooled logistic score
//! test of `θ = 0` for `θ'Q*_m(ψ)` added to the treatment model.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::{format_float, Dataset, History};
use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::glm::{spd_inverse, DEFAULT_LEVEL};
use crate::gnull::PersonOccasions;
use crate::optim::{bracketed_root, golden_section, nelder_mead};
use crate::par;
use crate::sndm::blip::{h_from_indices, BlipFamily, BlipSpec};
use crate::stats::chi_square_sf;

pub type QStarFn = dyn Fn(f64, &History<'_>) -> Vec<f64> + Send + Sync;

/// The estimating-function basis `q*(H(ψ), l̄_m, ā_{m-1})`.
#[derive(Clone)]
pub enum QStar {
    /// `H(ψ) · b_m(l̄_m, ā_{m-1}, a_m = 1)`.
    HTimesBasis,
    Custom { name: String, f: Arc<QStarFn> },
}

impl QStar {
    pub fn describe(&self) -> String {
        match self {
            QStar::HTimesBasis => "H * blip basis".into(),
            QStar::Custom { name, .. } => name.clone(),
        }
    }
}

impl std::fmt::Debug for QStar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "QStar({})", self.describe())
    }
}

#[derive(Debug, Clone)]
pub struct GEstimateConfig {
    pub treatment_model: DesignSpec,
    pub qstar: QStar,
    /// Search box, one `(lo, hi)` per component of `ψ`.
    pub psi_box: Vec<(f64, f64)>,
    /// Treatment-model coefficients known by design.
    pub alpha_known: Option<Vec<f64>>,
    /// Confidence-set grid points per component.
    pub grid_points: usize,
    pub level: f64,
}

impl GEstimateConfig {
    pub fn new(treatment_model: DesignSpec, psi_box: Vec<(f64, f64)>) -> Self {
        GEstimateConfig {
            treatment_model,
            qstar: QStar::HTimesBasis,
            psi_box,
            alpha_known: None,
            grid_points: 201,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub psi: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub accept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GEstimate {
    pub psi_hat: Vec<f64>,
    /// Score statistic and p-value at `ψ̃`.
    pub statistic: f64,
    pub p_value: f64,
    /// Set when no zero of the score was found inside the box.
    pub boundary: bool,
    /// Every grid point with its test decision; the confidence set is the
    /// accepted subset.
    pub confidence_set: Vec<GridPoint>,
    /// Grid spacing per component.
    pub resolution: Vec<f64>,
    pub qstar: String,
    pub notes: Vec<String>,
}

impl GEstimate {
    pub fn accepted(&self) -> impl Iterator<Item = &GridPoint> {
        self.confidence_set.iter().filter(|g| g.accept)
    }

    /// Smallest and largest accepted value of component `j`.
    pub fn interval(&self, j: usize) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.accepted().map(|g| g.psi[j]).collect();
        if vals.is_empty() {
            return None;
        }
        Some((vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
    }

    /// Decision at the grid point nearest `psi`.
    pub fn accepts(&self, psi: &[f64]) -> bool {
        let dist = |g: &GridPoint| g.psi.iter().zip(psi).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        self.confidence_set
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .is_some_and(|g| g.accept)
    }

    /// CSV with columns `psi0,...,score_stat,p,accept`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.psi_hat.len()).map(|j| format!("psi{j}")).collect();
        header.extend(["score_stat".into(), "p".into(), "accept".into()]);
        wr.write_record(&header)?;
        for g in &self.confidence_set {
            let mut rec: Vec<String> = g.psi.iter().map(|v| format_float(*v)).collect();
            rec.push(format_float(g.statistic));
            rec.push(format_float(g.p_value));
            rec.push(g.accept.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Score evaluation at arbitrary `ψ` with the treatment model fit once.
pub struct GEstimator<'a> {
    dataset: &'a Dataset,
    family: BlipSpec,
    qstar: QStar,
    stacked: PersonOccasions,
    resid: Vec<f64>,
    weight: Vec<f64>,
    /// `(XᵀWX)⁻¹`, absent when `α` is known.
    info_inv: Option<DMatrix<f64>>,
    /// `b_m(l̄_m, ā_m)` per subject and occasion.
    bases: Vec<Vec<Vec<f64>>>,
    /// `b_m` with `a_m = 1`, per person-occasion row.
    unit: Vec<Vec<f64>>,
}

impl<'a> GEstimator<'a> {
    pub fn new(dataset: &'a Dataset, family: &BlipSpec, treatment_model: &DesignSpec, qstar: QStar, alpha_known: Option<&[f64]>) -> Result<Self> {
        family.check()?;
        if family.family == BlipFamily::Multiplicative {
            if let Some(i) = dataset.rows.iter().position(|t| !(t.y > 0.0)) {
                return Err(Error::Contract(format!("multiplicative blips need Y > 0 (row {i})")));
            }
        }
        let stacked = PersonOccasions::stack(dataset, treatment_model)?;
        let fit = stacked.treatment_fit(alpha_known)?;
        let resid: Vec<f64> = fit.response().iter().zip(fit.fitted().iter()).map(|(a, p)| a - p).collect();
        let weight: Vec<f64> = fit.weights().iter().copied().collect();
        let info_inv = if alpha_known.is_some() {
            None
        } else {
            let x = &stacked.x;
            let mut xw = x.clone();
            for (r, mut row) in xw.row_iter_mut().enumerate() {
                row *= weight[r];
            }
            Some(spd_inverse(&(x.transpose() * xw))?)
        };
        let occ = dataset.k() + 1;
        let bases = dataset
            .rows
            .iter()
            .map(|t| (0..occ).map(|m| family.basis(m, &t.l[..=m], &t.a[..=m])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let unit = (0..stacked.len())
            .map(|r| {
                let t = &dataset.rows[stacked.subject[r]];
                let m = stacked.occasion[r];
                family.unit_basis(m, &t.l[..=m], &t.a[..m])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GEstimator {
            dataset,
            family: family.clone(),
            qstar,
            stacked,
            resid,
            weight,
            info_inv,
            bases,
            unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// `H_i(ψ)` for every subject.
    pub fn h_values(&self, psi: &[f64]) -> Vec<f64> {
        let spec = self.family.with_psi(psi);
        self.dataset
            .rows
            .iter()
            .zip(&self.bases)
            .map(|(t, b)| {
                let idx: Vec<f64> = b.iter().map(|bm| bm.iter().zip(psi).map(|(x, p)| x * p).sum()).collect();
                h_from_indices(&spec, t.y, &idx).h
            })
            .collect()
    }

    /// Score vector `U(ψ)` and its null covariance `V(ψ)`.
    pub fn score(&self, psi: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        if psi.len() != d {
            return Err(Error::InvalidParameter(format!("ψ has {} entries, blip has {d}", psi.len())));
        }
        let h = self.h_values(psi);
        let p = self.stacked.x.ncols();
        let mut u = DVector::zeros(d);
        let mut zwz = DMatrix::zeros(d, d);
        let mut zwx = DMatrix::zeros(d, p);
        let mut z = vec![0.0; d];
        for r in 0..self.stacked.len() {
            let i = self.stacked.subject[r];
            match &self.qstar {
                QStar::HTimesBasis => {
                    for (zj, bj) in z.iter_mut().zip(&self.unit[r]) {
                        *zj = h[i] * bj;
                    }
                }
                QStar::Custom { f, .. } => {
                    let t = &self.dataset.rows[i];
                    let m = self.stacked.occasion[r];
                    z = f(h[i], &t.history(m));
                    if z.len() != d || z.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidParameter("q* must return dim(ψ) finite values".into()));
                    }
                }
            }
            let w = self.weight[r];
            for j in 0..d {
                u[j] += z[j] * self.resid[r];
                for k in 0..d {
                    zwz[(j, k)] += w * z[j] * z[k];
                }
                if self.info_inv.is_some() {
                    for k in 0..p {
                        zwx[(j, k)] += w * z[j] * self.stacked.x[(r, k)];
                    }
                }
            }
        }
        let v = match &self.info_inv {
            Some(m) => &zwz - &zwx * m * zwx.transpose(),
            None => zwz,
        };
        Ok((u, v))
    }

    /// Chi-square score statistic `UᵀV⁻¹U`.
    pub fn statistic(&self, psi: &[f64]) -> Result<f64> {
        let (u, v) = self.score(psi)?;
        if u.amax() == 0.0 {
            return Ok(0.0);
        }
        let inv = spd_inverse(&v).map_err(|_| Error::Degenerate("q* has zero residual variance given the treatment model".into()))?;
        Ok((u.transpose() * inv * &u)[(0, 0)].max(0.0))
    }

    /// `U / V^{1/2}` for scalar `ψ`.
    pub fn signed_score(&self, psi: f64) -> Result<f64> {
        let (u, v) = self.score(&[psi])?;
        if !(v[(0, 0)] > 0.0) {
            return Err(Error::Degenerate("q* has zero residual variance given the treatment model".into()));
        }
        Ok(u[0] / v[(0, 0)].sqrt())
    }

    pub fn p_value(&self, psi: &[f64]) -> Result<f64> {
        Ok(chi_square_sf(self.statistic(psi)?, self.dim()))
    }
}

fn grid_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
}

const MAX_GRID: usize = 2_000_000;

/// A score test of `θ = 0` indexed by `ψ`, inverted by [`invert_score_test`].
pub trait ScoreSource: Sync {
    fn dim(&self) -> usize;
    /// Chi-square statistic on `dim` degrees of freedom.
    fn statistic(&self, psi: &[f64]) -> Result<f64>;
    /// Standardised score for scalar `ψ`.
    fn signed_score(&self, psi: f64) -> Result<f64>;
}

impl ScoreSource for GEstimator<'_> {
    fn dim(&self) -> usize {
        GEstimator::dim(self)
    }
    fn statistic(&self, psi: &[f64]) -> Result<f64> {
        GEstimator::statistic(self, psi)
    }
    fn signed_score(&self, psi: f64) -> Result<f64> {
        GEstimator::signed_score(self, psi)
    }
}

/// `ψ̃` and the score-test confidence set over the configured box.
pub fn g_estimate(dataset: &Dataset, family: &BlipSpec, cfg: &GEstimateConfig) -> Result<GEstimate> {
    let est = GEstimator::new(dataset, family, &cfg.treatment_model, cfg.qstar.clone(), cfg.alpha_known.as_deref())?;
    let mut g = invert_score_test(&est, &cfg.psi_box, cfg.grid_points, cfg.level, cfg.qstar.describe())?;
    if cfg.alpha_known.is_none() {
        g.notes.insert(0, "valid if the treatment model is correct".to_string());
    }
    Ok(g)
}

/// Grid evaluation of the test over `psi_box`, then a root or minimum
/// search started from the best grid point.
pub fn invert_score_test<S: ScoreSource>(src: &S, psi_box: &[(f64, f64)], grid_points: usize, level: f64, qstar: String) -> Result<GEstimate> {
    let d = src.dim();
    if psi_box.len() != d {
        return Err(Error::InvalidParameter(format!("search box has {} components, ψ has {d}", psi_box.len())));
    }
    if psi_box.iter().any(|(lo, hi)| !(lo < hi)) || grid_points < 2 {
        return Err(Error::InvalidParameter("search box needs lo < hi and at least two grid points".into()));
    }
    let total = grid_points.checked_pow(d as u32).unwrap_or(usize::MAX);
    if total > MAX_GRID {
        return Err(Error::InvalidParameter(format!(
            "{total} grid points requested; lower grid_points for dim ψ = {d}"
        )));
    }
    let axes: Vec<Vec<f64>> = psi_box.iter().map(|&(lo, hi)| grid_axis(lo, hi, grid_points)).collect();
    let resolution: Vec<f64> = psi_box.iter().map(|&(lo, hi)| (hi - lo) / (grid_points - 1) as f64).collect();
    let point = |mut flat: usize| -> Vec<f64> {
        let mut psi = vec![0.0; d];
        for j in (0..d).rev() {
            psi[j] = axes[j][flat % grid_points];
            flat /= grid_points;
        }
        psi
    };
    let stats = par::try_map(total, |g| src.statistic(&point(g)))?;
    let confidence_set: Vec<GridPoint> = stats
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            let p = chi_square_sf(s, d);
            GridPoint {
                psi: point(g),
                statistic: s,
                p_value: p,
                accept: p >= level,
            }
        })
        .collect();
    let best = stats
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(g, _)| g)
        .expect("non-empty grid");
    let (psi_hat, boundary) = if d == 1 {
        scalar_search(src, &axes[0], best)?
    } else {
        multi_search(src, &confidence_set, &resolution, psi_box)?
    };
    let statistic = src.statistic(&psi_hat)?;
    let p_value = chi_square_sf(statistic, d);
    let mut notes = Vec::new();
    if boundary {
        notes.push("no zero of the score inside the search box; boundary solution".to_string());
    }
    if !confidence_set.iter().any(|g| g.accept) {
        notes.push("confidence set is empty on the grid".to_string());
    }
    Ok(GEstimate {
        psi_hat,
        statistic,
        p_value,
        boundary,
        confidence_set,
        resolution,
        qstar,
        notes,
    })
}

fn scalar_search<S: ScoreSource>(est: &S, axis: &[f64], best: usize) -> Result<(Vec<f64>, bool)> {
    let signed = |j: usize| est.signed_score(axis[j]);
    let here = signed(best)?;
    if here == 0.0 {
        return Ok((vec![axis[best]], false));
    }
    for nb in [best.checked_sub(1), Some(best + 1).filter(|&j| j < axis.len())].into_iter().flatten() {
        if signed(nb)?.signum() != here.signum() {
            let (lo, hi) = if nb < best { (axis[nb], axis[best]) } else { (axis[best], axis[nb]) };
            let root = bracketed_root(|p| est.signed_score(p), lo, hi, 1e-12)?;
            return Ok((vec![root], false));
        }
    }
    let lo = axis[best.saturating_sub(1)];
    let hi = axis[(best + 1).min(axis.len() - 1)];
    let (x, _) = golden_section(|p| est.statistic(&[p]), lo, hi, 1e-10)?;
    let boundary = best == 0 || best + 1 == axis.len();
    Ok((vec![x], boundary))
}

fn multi_search<S: ScoreSource>(est: &S, grid: &[GridPoint], resolution: &[f64], psi_box: &[(f64, f64)]) -> Result<(Vec<f64>, bool)> {
    let mut order: Vec<&GridPoint> = grid.iter().collect();
    order.sort_by(|a, b| a.statistic.total_cmp(&b.statistic));
    let inside = |psi: &[f64]| psi.iter().zip(psi_box).all(|(v, (lo, hi))| v >= lo && v <= hi);
    let objective = |psi: &[f64]| -> Result<f64> {
        if !inside(psi) {
            return Ok(f64::MAX);
        }
        est.statistic(psi)
    };
    let step: Vec<f64> = resolution.iter().map(|r| 2.0 * r).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in order.iter().take(3) {
        let m = nelder_mead(objective, &start.psi, &step, 1e-12, 2000)?;
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (x, v) = best.expect("at least one start");
    let on_edge = x
        .iter()
        .zip(psi_box)
        .zip(resolution)
        .any(|((v, (lo, hi)), r)| (v - lo).abs() < *r || (hi - v).abs() < *r);
    Ok((x, on_edge && v > 1e-8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Feature;
    use crate::simulate::{simulate, SndmScenario};

    fn treatment_model() -> DesignSpec {
        DesignSpec::new(vec![Feature::Intercept, Feature::l(0), Feature::a(1)]).unwrap()
    }

    fn shift_family() -> BlipSpec {
        BlipSpec::constant_shift(0.0)
    }

    #[test]
    fn recovers_the_shift() {
        let d = simulate(&SndmScenario::recovery_default(1.0), 4000, 21).unwrap();
        let cfg = GEstimateConfig::new(treatment_model(), vec![(-1.0, 3.0)]);
        let g = g_estimate(&d, &shift_family(), &cfg).unwrap();
        assert!((g.psi_hat[0] - 1.0).abs() < 0.15);
        assert!(g.statistic < 1e-12);
        assert!(g.p_value > 0.999);
        assert!(!g.boundary);
        let (lo, hi) = g.interval(0).unwrap();
        assert!(lo <= g.psi_hat[0] && g.psi_hat[0] <= hi);
        assert!(g.accepts(&g.psi_hat));
    }

    #[test]
    fn bisection_agrees_with_the_grid() {
        let d = simulate(&SndmScenario::recovery_default(0.5), 1000, 5).unwrap();
        let cfg = GEstimateConfig::new(treatment_model(), vec![(-0.5, 1.5)]);
        let g = g_estimate(&d, &shift_family(), &cfg).unwrap();
        let grid_best = g
            .confidence_set
            .iter()
            .min_by(|a, b| a.statistic.total_cmp(&b.statistic))
            .unwrap();
        assert!((grid_best.psi[0] - g.psi_hat[0]).abs() <= g.resolution[0]);
        // The signed score is monotone along the grid for this design.
        let est = GEstimator::new(&d, &shift_family(), &treatment_model(), QStar::HTimesBasis, None).unwrap();
        let s: Vec<f64> = g.confidence_set.iter().map(|p| est.signed_score(p.psi[0]).unwrap()).collect();
        assert!(s.windows(2).all(|w| w[1] <= w[0]) || s.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn box_without_root_is_a_boundary_solution() {
        let d = simulate(&SndmScenario::recovery_default(1.0), 2000, 6).unwrap();
        let cfg = GEstimateConfig::new(treatment_model(), vec![(2.0, 3.0)]);
        let g = g_estimate(&d, &shift_family(), &cfg).unwrap();
        assert!(g.boundary);
        assert!((g.psi_hat[0] - 2.0).abs() < 0.01);
    }

    #[test]
    fn two_dimensional_search() {
        let s = SndmScenario::discrete_default();
        let d = simulate(&s, 5000, 2).unwrap();
        let mut cfg = GEstimateConfig::new(treatment_model(), vec![(-1.0, 3.0), (-1.0, 3.0)]);
        cfg.grid_points = 41;
        let g = g_estimate(&d, &s.blip.with_psi(&[0.0, 0.0]), &cfg).unwrap();
        assert!(g.statistic < 1e-6);
        assert!((g.psi_hat[0] - 1.0).abs() < 0.4 && (g.psi_hat[1] - 1.0).abs() < 0.6);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("psi0,psi1,score_stat,p,accept\n"));
        assert_eq!(text.lines().count(), 41 * 41 + 1);
    }

    #[test]
    fn custom_qstar_matches_default() {
        let d = simulate(&SndmScenario::recovery_default(1.0), 500, 8).unwrap();
        let fam = shift_family();
        let f: Arc<QStarFn> = Arc::new(|h, _| vec![h]);
        let a = GEstimator::new(&d, &fam, &treatment_model(), QStar::HTimesBasis, None).unwrap();
        let b = GEstimator::new(&d, &fam, &treatment_model(), QStar::Custom { name: "H".into(), f }, None).unwrap();
        for psi in [-0.3, 0.4, 1.7] {
            assert!((a.statistic(&[psi]).unwrap() - b.statistic(&[psi]).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn h_values_at_zero_are_outcomes() {
        let d = simulate(&SndmScenario::recovery_default(1.0), 50, 8).unwrap();
        let est = GEstimator::new(&d, &shift_family(), &treatment_model(), QStar::HTimesBasis, None).unwrap();
        assert_eq!(est.h_values(&[0.0]), d.outcomes());
    }
}

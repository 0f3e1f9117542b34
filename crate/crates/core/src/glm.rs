//! Normal-linear and logistic maximum likelihood with Wald and Rao score
//! tests.
//!
//! Linear fits solve the normal equations through a Cholesky factor of
//! `XᵀX`; logistic fits run Newton–Raphson (iteratively reweighted least
//! squares) with step halving on likelihood decrease.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{chi_square_sf, two_sided_normal_p};

pub const DEFAULT_LEVEL: f64 = 0.05;
const CONDITION_LIMIT: f64 = 1e12;
const JITTER: f64 = 1e-10;
const MAX_ITER: usize = 100;
const SEPARATION_COEF: f64 = 30.0;

/// Numerically stable logistic function.
pub fn expit(b: f64) -> f64 {
    if b >= 0.0 {
        1.0 / (1.0 + (-b).exp())
    } else {
        let e = b.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + e^b)` without overflow.
fn log1pexp(b: f64) -> f64 {
    if b > 0.0 {
        b + (-b).exp().ln_1p()
    } else {
        b.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reference {
    ChiSquare { df: usize },
    /// Two-sided standard normal.
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub reference: Reference,
    pub p_value: f64,
    pub level: f64,
    pub reject: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn chi_square(statistic: f64, df: usize, level: f64) -> Self {
        let p = chi_square_sf(statistic, df);
        TestReport {
            statistic,
            reference: Reference::ChiSquare { df },
            p_value: p,
            level,
            reject: p < level,
            notes: Vec::new(),
        }
    }

    pub fn normal(z: f64, level: f64) -> Self {
        let p = two_sided_normal_p(z);
        TestReport {
            statistic: z,
            reference: Reference::StandardNormal,
            p_value: p,
            level,
            reject: p < level,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.notes.push(note.to_string());
        self
    }

    pub fn at_level(mut self, level: f64) -> Self {
        self.level = level;
        self.reject = self.p_value < level;
        self
    }
}

/// A fitted conditional model together with the data it was fit on, so
/// score tests can be evaluated at the null fit.
#[derive(Debug, Clone)]
pub struct FittedGlm {
    pub family: Family,
    pub coef: Vec<f64>,
    /// `σ̂²` for the normal family, 1 for logistic.
    pub dispersion: f64,
    pub vcov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    x: DMatrix<f64>,
    y: DVector<f64>,
    offset: DVector<f64>,
    fitted: DVector<f64>,
}

impl FittedGlm {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.coef.len()).map(|j| self.vcov[(j, j)].sqrt()).collect()
    }

    /// Linear predictor for a new design row (offset excluded).
    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        self.coef.iter().zip(row).map(|(c, x)| c * x).sum()
    }

    /// Score vector `Xᵀ(y − μ̂)/φ` at the fit.
    pub fn score(&self) -> DVector<f64> {
        self.x.transpose() * (&self.y - &self.fitted) / self.dispersion
    }

    pub fn weights(&self) -> DVector<f64> {
        match self.family {
            Family::Normal => DVector::from_element(self.n(), 1.0 / self.dispersion),
            Family::Logistic => self.fitted.map(|p| p * (1.0 - p)),
        }
    }

    /// A logistic "fit" with no free coefficients: probabilities are
    /// `expit(offset)`. Used when treatment-model coefficients are known by
    /// design.
    pub fn fixed_logistic(offset: &[f64], y: &[f64]) -> Result<Self> {
        check_response(y, Family::Logistic)?;
        if offset.len() != y.len() {
            return Err(Error::InvalidParameter("offset and response lengths differ".into()));
        }
        let off = DVector::from_column_slice(offset);
        let yv = DVector::from_column_slice(y);
        let fitted = off.map(expit);
        let loglik = logistic_loglik(&yv, &off);
        Ok(FittedGlm {
            family: Family::Logistic,
            coef: Vec::new(),
            dispersion: 1.0,
            vcov: DMatrix::zeros(0, 0),
            converged: true,
            iterations: 0,
            loglik,
            x: DMatrix::zeros(y.len(), 0),
            y: yv,
            offset: off,
            fitted,
        })
    }
}

pub fn design_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidParameter("ragged design rows".into()));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn check_response(y: &[f64], family: Family) -> Result<()> {
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("response {i} is not finite")));
    }
    if family == Family::Logistic {
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "logistic response {i} = {} is not in {{0, 1}}",
                y[i]
            )));
        }
    }
    Ok(())
}

fn condition_number(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let gram = x.transpose() * x;
    let c = condition_number(&gram);
    if !(c <= CONDITION_LIMIT) {
        return Err(Error::RankDeficient { condition: c });
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix through Cholesky, with
/// diagonal jitter if the first factorisation fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let inv = match sym.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => (&sym + DMatrix::identity(m.nrows(), m.nrows()) * JITTER)
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?,
    };
    Ok((&inv + inv.transpose()) * 0.5)
}

fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let jittered = &sym + DMatrix::identity(m.nrows(), m.nrows()) * JITTER;
    jittered
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
}

/// Ordinary least squares with MLE dispersion `σ̂² = RSS / n`.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<FittedGlm> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidParameter("design and response lengths differ".into()));
    }
    if p == 0 || n <= p {
        return Err(Error::InvalidParameter(format!("need n > p >= 1, got n = {n}, p = {p}")));
    }
    check_response(y, Family::Normal)?;
    check_rank(x)?;
    let yv = DVector::from_column_slice(y);
    let gram = x.transpose() * x;
    let beta = spd_solve(&gram, &(x.transpose() * &yv))?;
    let fitted = x * &beta;
    let resid = &yv - &fitted;
    let rss = resid.norm_squared();
    let sigma2 = (rss / n as f64).max(f64::EPSILON);
    let vcov = spd_inverse(&gram)? * sigma2;
    let loglik = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln()) - 0.5 * rss / sigma2;
    Ok(FittedGlm {
        family: Family::Normal,
        coef: beta.iter().copied().collect(),
        dispersion: sigma2,
        vcov,
        converged: true,
        iterations: 1,
        loglik,
        x: x.clone(),
        y: yv,
        offset: DVector::zeros(n),
        fitted,
    })
}

fn logistic_loglik(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    y.iter().zip(eta.iter()).map(|(&yi, &e)| yi * e - log1pexp(e)).sum()
}

pub fn fit_logistic(x: &DMatrix<f64>, y: &[f64]) -> Result<FittedGlm> {
    fit_logistic_offset(x, y, None)
}

/// Logistic regression with an optional fixed offset in the linear
/// predictor.
pub fn fit_logistic_offset(x: &DMatrix<f64>, y: &[f64], offset: Option<&[f64]>) -> Result<FittedGlm> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::InvalidParameter("design and response lengths differ".into()));
    }
    if p == 0 {
        return FittedGlm::fixed_logistic(offset.unwrap_or(&vec![0.0; n]), y);
    }
    if n <= p {
        return Err(Error::InvalidParameter(format!("need n > p, got n = {n}, p = {p}")));
    }
    check_response(y, Family::Logistic)?;
    check_rank(x)?;
    let yv = DVector::from_column_slice(y);
    let off = offset.map_or_else(|| DVector::zeros(n), DVector::from_column_slice);
    let xt = x.transpose();

    let mut beta = DVector::zeros(p);
    let mut eta = x * &beta + &off;
    let mut ll = logistic_loglik(&yv, &eta);
    let mut converged = false;
    let mut iterations = 0;
    let mut polish = false;

    while iterations < MAX_ITER {
        iterations += 1;
        let mu = eta.map(expit);
        let score = &xt * (&yv - &mu);
        if score.amax() < 1e-8 {
            converged = true;
            break;
        }
        let w = mu.map(|m| m * (1.0 - m));
        let info = weighted_gram(x, &w);
        let step = spd_solve(&info, &score)?;

        let mut scale = 1.0;
        let mut next = &beta + &step;
        let mut next_eta = x * &next + &off;
        let mut next_ll = logistic_loglik(&yv, &next_eta);
        let mut halvings = 0;
        while next_ll < ll - 1e-12 * ll.abs().max(1.0) && halvings < 40 {
            scale *= 0.5;
            next = &beta + &step * scale;
            next_eta = x * &next + &off;
            next_ll = logistic_loglik(&yv, &next_eta);
            halvings += 1;
        }
        let increasing = next_ll > ll;
        let rel = (next_ll - ll).abs() / ll.abs().max(1e-300);
        beta = next;
        eta = next_eta;
        ll = next_ll;
        if beta.amax() > SEPARATION_COEF && increasing {
            return Err(Error::Separation { iterations });
        }
        if polish {
            converged = true;
            break;
        }
        if rel < 1e-10 {
            // One more full Newton step drives the score to machine level.
            polish = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    let fitted = eta.map(expit);
    let w = fitted.map(|m| m * (1.0 - m));
    let vcov = spd_inverse(&weighted_gram(x, &w))?;
    Ok(FittedGlm {
        family: Family::Logistic,
        coef: beta.iter().copied().collect(),
        dispersion: 1.0,
        vcov,
        converged,
        iterations,
        loglik: ll,
        x: x.clone(),
        y: yv,
        offset: off,
        fitted,
    })
}

fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        col.component_mul_assign(w);
    }
    x.transpose() * xw
}

fn cross_weighted(a: &DMatrix<f64>, w: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut bw = b.clone();
    for mut col in bw.column_iter_mut() {
        col.component_mul_assign(w);
    }
    a.transpose() * bw
}

/// Wald test that the coefficients at `restriction` are all zero.
pub fn wald_test(fit: &FittedGlm, restriction: &[usize]) -> Result<TestReport> {
    wald_test_at(fit, restriction, DEFAULT_LEVEL)
}

pub fn wald_test_at(fit: &FittedGlm, restriction: &[usize], level: f64) -> Result<TestReport> {
    wald_statistic(&fit.coef, &fit.vcov, restriction).map(|(s, df)| TestReport::chi_square(s, df, level))
}

/// `c_Rᵀ (V_RR)⁻¹ c_R` for an arbitrary coefficient vector and covariance.
pub fn wald_statistic(coef: &[f64], vcov: &DMatrix<f64>, restriction: &[usize]) -> Result<(f64, usize)> {
    if restriction.is_empty() {
        return Err(Error::InvalidParameter("empty restriction".into()));
    }
    if let Some(&j) = restriction.iter().find(|&&j| j >= coef.len()) {
        return Err(Error::InvalidParameter(format!("coefficient index {j} out of range")));
    }
    let r = restriction.len();
    let c = DVector::from_fn(r, |i, _| coef[restriction[i]]);
    if c.amax() == 0.0 {
        return Ok((0.0, r));
    }
    let v = DMatrix::from_fn(r, r, |i, j| vcov[(restriction[i], restriction[j])]);
    let inv = v
        .cholesky()
        .ok_or_else(|| Error::Singular("restricted covariance block".into()))?
        .inverse();
    Ok(((c.transpose() * inv * &c)[(0, 0)], r))
}

/// Rao score test of `θ = 0` when `θᵀ(added)` augments the linear predictor
/// of `base`, evaluated at the null fit.
pub fn score_test_added_covariate(base: &FittedGlm, added: &DMatrix<f64>) -> Result<TestReport> {
    score_test_added_covariate_at(base, added, DEFAULT_LEVEL)
}

pub fn score_test_added_covariate_at(base: &FittedGlm, added: &DMatrix<f64>, level: f64) -> Result<TestReport> {
    let (stat, q) = score_statistic(base, added)?;
    Ok(TestReport::chi_square(stat, q, level))
}

/// Score vector `Zᵀ(y − μ̂)/φ` and its null covariance adjusted for the
/// estimated base coefficients.
pub fn score_pieces(base: &FittedGlm, added: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if added.nrows() != base.n() {
        return Err(Error::InvalidParameter("added columns have the wrong length".into()));
    }
    if added.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("added column is not finite".into()));
    }
    let w = base.weights();
    let resid = &base.y - &base.fitted;
    let u = added.transpose() * resid / base.dispersion;
    let zwz = cross_weighted(added, &w, added);
    let v = if base.x.ncols() == 0 {
        zwz
    } else {
        let zwx = cross_weighted(added, &w, &base.x);
        let xwx_inv = spd_inverse(&weighted_gram(&base.x, &w))?;
        &zwz - &zwx * xwx_inv * zwx.transpose()
    };
    Ok((u, v))
}

pub fn score_statistic(base: &FittedGlm, added: &DMatrix<f64>) -> Result<(f64, usize)> {
    let q = added.ncols();
    if q == 0 {
        return Err(Error::InvalidParameter("no added columns".into()));
    }
    let (u, v) = score_pieces(base, added)?;
    let scale = (0..q).map(|j| added.column(j).amax()).fold(0.0, f64::max).max(1.0);
    let n = base.n() as f64;
    if u.amax() <= 1e-9 * scale * n.sqrt() {
        return Ok((0.0, q));
    }
    let diag_total: f64 = (0..q).map(|j| v[(j, j)]).sum();
    let eig = v.clone().symmetric_eigen().eigenvalues;
    let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-10 * diag_total.abs().max(1e-300)) {
        return Err(Error::Degenerate(
            "added column has zero residual variance given the base model".into(),
        ));
    }
    let inv = spd_inverse(&v)?;
    Ok(((u.transpose() * inv * &u)[(0, 0)].max(0.0), q))
}

//! Why an SNDM cannot test for a direct effect of `A_0`.
//!
//! On a two-occasion trial with no `A_0 → Y` arrow but an `A_1 × U`
//! interaction, the closed-form g-estimates of
//! `γ*(y, a_0) = y − ψ_1 a_0` and
//! `γ*(y, l, ā_1) = y − ψ_2 a_1 − ψ_3 a_1 a_0 − ψ_4 a_1 l − ψ_5 a_1 a_0 l`,
//! together with the logistic model `pr[L = 1 | A_0] = expit(γ_0 + γ_1 A_0)`,
//! reject the no-direct-effect null even though it is true. The null
//! within these models is `ψ_1 = 0` together with either
//! `ψ_3 = ψ_5 = γ_1 = 0` or `ψ_3 = ψ_4 = ψ_5 = 0`.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{expit, fit_logistic, spd_inverse, wald_statistic, TestReport, DEFAULT_LEVEL};
use crate::simulate::SequentialConfig;

/// Parameter layout: `π_1`, `b` (mean of `A_1` on `(1, a_0, l)`), `ψ_1..ψ_5`,
/// `γ_0, γ_1`.
const P: usize = 11;
const PSI1: usize = 4;
const PSI: [usize; 5] = [4, 5, 6, 7, 8];
const GAMMA: [usize; 2] = [9, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma2Report {
    /// `ψ_1..ψ_5`.
    pub psi: [f64; 5],
    pub gamma: [f64; 2],
    /// Joint sandwich covariance of all stacked parameters in the order
    /// `π_1, b_0, b_1, b_2, ψ_1..ψ_5, γ_0, γ_1`.
    pub vcov: DMatrix<f64>,
    /// Wald test of `ψ_1 = ψ_3 = ψ_5 = γ_1 = 0`.
    pub test_no_covariate_link: TestReport,
    /// Wald test of `ψ_1 = ψ_3 = ψ_4 = ψ_5 = 0`.
    pub test_no_modification: TestReport,
    /// The naive test rejects only when both restrictions are rejected.
    pub naive_reject: bool,
    /// `min` of the two Wald statistics: large only when neither
    /// sufficient condition for constancy in `a_0` is compatible with the fit.
    pub violation_statistic: f64,
    /// `e(a_0, a_1) = −ψ_2 a_1 − ψ_3 a_0 a_1 − (ψ_4 a_1 + ψ_5 a_0 a_1) expit(γ_0 + γ_1 a_0)`
    /// on `a_0, a_1 ∈ {−1, 0, 1}`.
    pub grid: Vec<(f64, f64, f64)>,
    /// Largest range over `a_0` of `e(a_0, a_1)` at fixed `a_1`.
    pub constancy_spread: f64,
    /// `z` for `e(1, 1) − e(−1, 1)` by the delta method.
    pub constancy_z: f64,
}

/// A two-occasion trial with `Y = 1 + 2U + A_1 + δ A_1 U + N(0, 1)`.
pub fn interaction_scenario(delta: f64) -> SequentialConfig {
    SequentialConfig::with_effects(0.0, 1.0, delta)
}

struct Stacked {
    theta: Vec<f64>,
    vcov: DMatrix<f64>,
}

fn solve(dataset: &Dataset) -> Result<Stacked> {
    dataset.require_two_occasion("the SNDM direct-effect demonstration")?;
    let n = dataset.n();
    let nf = n as f64;
    let a0 = dataset.treatment(0);
    let a1 = dataset.treatment(1);
    let l = dataset.covariate(1);
    let y = dataset.outcomes();

    let pi1 = a0.iter().sum::<f64>() / nf;
    let x2 = DMatrix::from_fn(n, 3, |i, j| [1.0, a0[i], l[i]][j]);
    let b = spd_inverse(&(x2.transpose() * &x2))? * x2.transpose() * DVector::from_column_slice(&a1);
    let r2: Vec<f64> = (0..n).map(|i| a1[i] - (b[0] + b[1] * a0[i] + b[2] * l[i])).collect();
    let r1: Vec<f64> = a0.iter().map(|v| v - pi1).collect();
    let q = |i: usize| [1.0, a0[i], l[i], a0[i] * l[i]];

    let mut lhs = DMatrix::<f64>::zeros(4, 4);
    let mut rhs = DVector::<f64>::zeros(4);
    for i in 0..n {
        let qi = q(i);
        for j in 0..4 {
            rhs[j] += qi[j] * r2[i] * y[i];
            for k in 0..4 {
                lhs[(j, k)] += qi[j] * r2[i] * a1[i] * qi[k];
            }
        }
    }
    let psi_late = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("second-occasion g-estimating equations".into()))?;
    let h1: Vec<f64> = (0..n)
        .map(|i| {
            let qi = q(i);
            y[i] - a1[i] * (0..4).map(|k| psi_late[k] * qi[k]).sum::<f64>()
        })
        .collect();
    let denom: f64 = (0..n).map(|i| a0[i] * r1[i]).sum();
    if denom == 0.0 {
        return Err(Error::ZeroVariance("A0".into()));
    }
    let psi1 = (0..n).map(|i| h1[i] * r1[i]).sum::<f64>() / denom;

    let z = DMatrix::from_fn(n, 2, |i, j| [1.0, a0[i]][j]);
    let gfit = fit_logistic(&z, &l)?;

    let mut theta = vec![0.0; P];
    theta[0] = pi1;
    theta[1..4].copy_from_slice(b.as_slice());
    theta[PSI1] = psi1;
    theta[5..9].copy_from_slice(psi_late.as_slice());
    theta[GAMMA[0]] = gfit.coef[0];
    theta[GAMMA[1]] = gfit.coef[1];

    let mut bread = DMatrix::<f64>::zeros(P, P);
    let mut meat = DMatrix::<f64>::zeros(P, P);
    for i in 0..n {
        let qi = q(i);
        let xi = [1.0, a0[i], l[i]];
        let h0 = h1[i] - psi1 * a0[i];
        let p = expit(gfit.coef[0] + gfit.coef[1] * a0[i]);
        let zi = [1.0, a0[i]];
        let mut u = [0.0; P];
        u[0] = r1[i];
        for j in 0..3 {
            u[1 + j] = xi[j] * r2[i];
        }
        u[PSI1] = h0 * r1[i];
        for j in 0..4 {
            u[5 + j] = qi[j] * h1[i] * r2[i];
        }
        u[GAMMA[0]] = l[i] - p;
        u[GAMMA[1]] = a0[i] * (l[i] - p);
        for j in 0..P {
            for k in 0..P {
                meat[(j, k)] += u[j] * u[k];
            }
        }
        // Derivatives of the stacked estimating functions.
        bread[(0, 0)] -= 1.0;
        for j in 0..3 {
            for k in 0..3 {
                bread[(1 + j, 1 + k)] -= xi[j] * xi[k];
            }
        }
        bread[(PSI1, 0)] -= h0;
        bread[(PSI1, PSI1)] -= a0[i] * r1[i];
        for k in 0..4 {
            bread[(PSI1, 5 + k)] -= r1[i] * a1[i] * qi[k];
        }
        for j in 0..4 {
            for k in 0..3 {
                bread[(5 + j, 1 + k)] -= qi[j] * h1[i] * xi[k];
            }
            for k in 0..4 {
                bread[(5 + j, 5 + k)] -= qi[j] * r2[i] * a1[i] * qi[k];
            }
        }
        for j in 0..2 {
            for k in 0..2 {
                bread[(GAMMA[j], GAMMA[k])] -= zi[j] * zi[k] * p * (1.0 - p);
            }
        }
    }
    let inv = bread
        .try_inverse()
        .ok_or_else(|| Error::Singular("stacked estimating-equation derivative".into()))?;
    let vcov = &inv * meat * inv.transpose();
    Ok(Stacked { theta, vcov })
}

fn expression(theta: &[f64], a0: f64, a1: f64) -> f64 {
    let [_, p2, p3, p4, p5] = [theta[4], theta[5], theta[6], theta[7], theta[8]];
    -p2 * a1 - p3 * a0 * a1 - (p4 * a1 + p5 * a0 * a1) * expit(theta[GAMMA[0]] + theta[GAMMA[1]] * a0)
}

pub fn lemma2_demo(dataset: &Dataset) -> Result<Lemma2Report> {
    lemma2_demo_at(dataset, DEFAULT_LEVEL)
}

pub fn lemma2_demo_at(dataset: &Dataset, level: f64) -> Result<Lemma2Report> {
    let s = solve(dataset)?;
    let wald = |idx: &[usize]| -> Result<TestReport> {
        let (stat, df) = wald_statistic(&s.theta, &s.vcov, idx)?;
        Ok(TestReport::chi_square(stat, df, level))
    };
    let t25 = wald(&[PSI[0], PSI[2], PSI[4], GAMMA[1]])?;
    let t26 = wald(&[PSI[0], PSI[2], PSI[3], PSI[4]])?;
    let levels = [-1.0, 0.0, 1.0];
    let mut grid = Vec::new();
    let mut spread: f64 = 0.0;
    for &a1 in &levels {
        let vals: Vec<f64> = levels.iter().map(|&a0| expression(&s.theta, a0, a1)).collect();
        for (&a0, &v) in levels.iter().zip(&vals) {
            grid.push((a0, a1, v));
        }
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
    }
    let contrast = |t: &[f64]| expression(t, 1.0, 1.0) - expression(t, -1.0, 1.0);
    let c0 = contrast(&s.theta);
    let mut grad = DVector::zeros(P);
    for j in 0..P {
        let h = 1e-6 * s.theta[j].abs().max(1.0);
        let mut up = s.theta.clone();
        let mut dn = s.theta.clone();
        up[j] += h;
        dn[j] -= h;
        grad[j] = (contrast(&up) - contrast(&dn)) / (2.0 * h);
    }
    let var = (grad.transpose() * &s.vcov * &grad)[(0, 0)];
    let constancy_z = if c0 == 0.0 { 0.0 } else { c0 / var.sqrt() };
    Ok(Lemma2Report {
        psi: [s.theta[4], s.theta[5], s.theta[6], s.theta[7], s.theta[8]],
        gamma: [s.theta[GAMMA[0]], s.theta[GAMMA[1]]],
        naive_reject: t25.reject && t26.reject,
        violation_statistic: t25.statistic.min(t26.statistic),
        test_no_covariate_link: t25,
        test_no_modification: t26,
        vcov: s.vcov,
        grid,
        constancy_spread: spread,
        constancy_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate;

    #[test]
    fn interaction_makes_the_naive_test_reject() {
        let d = simulate(&interaction_scenario(2.0), 5000, 1).unwrap();
        let r = lemma2_demo(&d).unwrap();
        assert!(r.gamma[1].abs() > 4.0 * r.vcov[(10, 10)].sqrt());
        assert!(r.naive_reject);
        assert!(r.violation_statistic > 40.0);
        // The fitted expression itself stays close to constant.
        assert!(r.constancy_spread < 0.3);
    }

    #[test]
    fn no_interaction_keeps_the_models_compatible() {
        let d = simulate(&interaction_scenario(0.0), 5000, 2).unwrap();
        let r = lemma2_demo(&d).unwrap();
        assert!((r.psi[1] - 1.0).abs() < 0.1, "{:?}", r.psi);
        assert!(r.constancy_z.abs() < 4.0);
        assert!(r.violation_statistic < 18.5);
    }

    #[test]
    fn sandwich_matches_replicate_spread() {
        // Replicate SD of ψ̂_2 against the average sandwich SE.
        let reps: Vec<(f64, f64)> = (0..60)
            .map(|s| {
                let d = simulate(&interaction_scenario(2.0), 1500, 100 + s).unwrap();
                let r = lemma2_demo(&d).unwrap();
                (r.psi[1], r.vcov[(5, 5)].sqrt())
            })
            .collect();
        let est: Vec<f64> = reps.iter().map(|r| r.0).collect();
        let sd = crate::stats::variance(&est).sqrt();
        let se = crate::stats::mean(&reps.iter().map(|r| r.1).collect::<Vec<_>>());
        assert!((sd / se - 1.0).abs() < 0.35, "sd {sd}, se {se}");
    }
}

//! Sample covariances and partial correlations among `(Y, L, A_0, A_1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats::covariance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    Y,
    L,
    A0,
    A1,
}

impl Var {
    fn column(self, d: &Dataset) -> Vec<f64> {
        match self {
            Var::Y => d.outcomes(),
            Var::L => d.covariate(1),
            Var::A0 => d.treatment(0),
            Var::A1 => d.treatment(1),
        }
    }
}

/// A requested partial correlation `r_{BC.D}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub b: Var,
    pub c: Var,
    pub given: Vec<Var>,
    #[serde(default)]
    pub value: f64,
}

impl Partial {
    pub fn new(b: Var, c: Var, given: Vec<Var>) -> Self {
        Partial { b, c, given, value: f64::NAN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaithfulnessDiagnostics {
    pub cov_y_l: f64,
    pub cov_y_a0: f64,
    pub cov_y_a1: f64,
    pub cov_l_a0: f64,
    pub partials: Vec<Partial>,
}

/// Covariances of the two-occasion variables and the requested partial
/// correlations, each from the inverse of the relevant correlation block.
pub fn diagnostics(dataset: &Dataset, requested: &[Partial]) -> Result<FaithfulnessDiagnostics> {
    dataset.require_two_occasion("diagnostics")?;
    if dataset.n() < 3 {
        return Err(Error::InvalidParameter("diagnostics need n >= 3".into()));
    }
    let cols: Vec<(Var, Vec<f64>)> = [Var::Y, Var::L, Var::A0, Var::A1]
        .into_iter()
        .map(|v| (v, v.column(dataset)))
        .collect();
    for (v, c) in &cols {
        if covariance(c, c) <= 0.0 {
            return Err(Error::ZeroVariance(format!("{v:?} has zero variance")));
        }
    }
    let col = |v: Var| &cols.iter().find(|(w, _)| *w == v).unwrap().1;
    let cov = |a: Var, b: Var| covariance(col(a), col(b));
    let mut partials = Vec::with_capacity(requested.len());
    for p in requested {
        let mut vars = vec![p.b, p.c];
        vars.extend(p.given.iter().copied());
        let k = vars.len();
        let s = DMatrix::from_fn(k, k, |i, j| cov(vars[i], vars[j]));
        let prec = s
            .try_inverse()
            .ok_or_else(|| Error::Singular("covariance block for partial correlation".into()))?;
        let r = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        partials.push(Partial {
            value: r.clamp(-1.0, 1.0),
            ..p.clone()
        });
    }
    Ok(FaithfulnessDiagnostics {
        cov_y_l: cov(Var::Y, Var::L),
        cov_y_a0: cov(Var::Y, Var::A0),
        cov_y_a1: cov(Var::Y, Var::A1),
        cov_l_a0: cov(Var::L, Var::A0),
        partials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Kind, Schema, Trajectory};
    use crate::simulate::{enumerate_joint, simulate, SequentialConfig};
    use crate::stats::variance;
    use rand::Rng;

    fn dataset(rows: Vec<Trajectory>) -> Dataset {
        let schema = Schema::new(1, vec![Kind::absent(), Kind::Continuous], vec![Kind::Continuous, Kind::Continuous]).unwrap();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn copied_column_covariance() {
        let mut rng = crate::rng::StreamKey::root(1).rng();
        let rows: Vec<Trajectory> = (0..500)
            .map(|_| {
                let a0: f64 = rng.random();
                Trajectory::new(vec![0.0, a0], vec![a0, rng.random()], rng.random())
            })
            .collect();
        let d = dataset(rows);
        let diag = diagnostics(&d, &[]).unwrap();
        assert!((diag.cov_l_a0 - variance(&d.treatment(0))).abs() < 1e-12);
        assert!(diag.cov_l_a0 > 0.0);
    }

    #[test]
    fn independent_columns_near_zero() {
        let n = 100_000;
        let mut rng = crate::rng::StreamKey::root(2).rng();
        let rows: Vec<Trajectory> = (0..n)
            .map(|_| Trajectory::new(vec![0.0, rng.random()], vec![rng.random(), rng.random()], rng.random()))
            .collect();
        let d = dataset(rows);
        let diag = diagnostics(&d, &[Partial::new(Var::Y, Var::L, vec![Var::A0])]).unwrap();
        // Uniform(0, 1) columns have sd 1/sqrt(12).
        let bound = 4.0 / (n as f64).sqrt() / 12.0;
        for c in [diag.cov_y_l, diag.cov_y_a0, diag.cov_y_a1, diag.cov_l_a0] {
            assert!(c.abs() < bound);
        }
        assert!(diag.partials[0].value.abs() <= 1.0);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let rows: Vec<Trajectory> = (0..10).map(|i| Trajectory::new(vec![0.0, 1.0], vec![i as f64, 0.5], i as f64)).collect();
        assert!(matches!(diagnostics(&dataset(rows), &[]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn default_null_scenario_is_faithful_signed() {
        let d = simulate(&SequentialConfig::null_paradox_default(), 100_000, 13).unwrap();
        let diag = diagnostics(&d, &[]).unwrap();
        // Exact signs from a discretised version of the same structure.
        let t = enumerate_joint(&SequentialConfig::binary_toy(0.0, 0.0), None).unwrap();
        let ey = t.expectation(|_, y| y);
        let el = t.expectation(|c, _| c.l[1]);
        let ea = t.expectation(|c, _| c.a[0]);
        let cov_yl = t.expectation(|c, y| c.l[1] * y) - ey * el;
        let cov_la = t.expectation(|c, _| c.l[1] * c.a[0]) - el * ea;
        assert!(cov_yl > 0.0 && cov_la > 0.0);
        let se = 4.0 / (d.n() as f64).sqrt();
        assert!(diag.cov_y_l > se);
        assert!(diag.cov_l_a0 > se);
    }
}

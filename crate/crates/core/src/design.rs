//! Feature constructors over covariate and treatment histories.
//!
//! A [`Feature`] is evaluated at occasion `m` against whatever history
//! prefix the caller supplies: `l̄_m` and `ā_{m-1}` for treatment models,
//! `l̄_m` and `ā_m` for blip functions, the full record for outcome
//! models. Lagged references that fall before occasion 0 evaluate to 0
//! (the virtual `a_{-1} = l_{-1} = 0`); references past the supplied
//! prefix are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized in the compact string notation accepted by `FromStr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Feature {
    Intercept,
    /// `l_{m - lag}`.
    L { lag: usize },
    /// `a_{m - lag}`.
    A { lag: usize },
    /// `l_j` at a fixed occasion `j`.
    LAt { index: usize },
    /// `a_j` at a fixed occasion `j`.
    AAt { index: usize },
    /// Indicator of `m == index`.
    Occasion { index: usize },
    Product { factors: Vec<Feature> },
    /// The inner feature at occasion `occasion`, zero elsewhere.
    AtOccasion { occasion: usize, feature: Box<Feature> },
}

impl Feature {
    pub fn l(lag: usize) -> Self {
        Feature::L { lag }
    }

    pub fn a(lag: usize) -> Self {
        Feature::A { lag }
    }

    pub fn l_at(index: usize) -> Self {
        Feature::LAt { index }
    }

    pub fn a_at(index: usize) -> Self {
        Feature::AAt { index }
    }

    pub fn product(factors: Vec<Feature>) -> Self {
        Feature::Product { factors }
    }

    pub fn at_occasion(occasion: usize, feature: Feature) -> Self {
        Feature::AtOccasion {
            occasion,
            feature: Box::new(feature),
        }
    }

    pub fn eval(&self, m: usize, l: &[f64], a: &[f64]) -> Result<f64> {
        Ok(match self {
            Feature::Intercept => 1.0,
            Feature::L { lag } => lagged(l, m, *lag, "L")?,
            Feature::A { lag } => lagged(a, m, *lag, "A")?,
            Feature::LAt { index } => absolute(l, *index, "L")?,
            Feature::AAt { index } => absolute(a, *index, "A")?,
            Feature::Occasion { index } => f64::from(u8::from(m == *index)),
            Feature::Product { factors } => {
                let mut p = 1.0;
                for f in factors {
                    p *= f.eval(m, l, a)?;
                }
                p
            }
            Feature::AtOccasion { occasion, feature } => {
                if m == *occasion {
                    feature.eval(m, l, a)?
                } else {
                    0.0
                }
            }
        })
    }

    /// Whether the feature is a multiple of the current treatment `a_m`,
    /// so it vanishes whenever `a_m = 0`.
    pub fn has_current_treatment_factor(&self) -> bool {
        match self {
            Feature::A { lag: 0 } => true,
            Feature::Product { factors } => factors.iter().any(|f| f.has_current_treatment_factor()),
            Feature::AtOccasion { occasion, feature } => {
                feature.has_current_treatment_factor()
                    || feature.has_treatment_at(*occasion)
            }
            _ => false,
        }
    }

    fn has_treatment_at(&self, occasion: usize) -> bool {
        match self {
            Feature::AAt { index } => *index == occasion,
            Feature::Product { factors } => factors.iter().any(|f| f.has_treatment_at(occasion)),
            _ => false,
        }
    }

    /// Whether the feature reads the current treatment `a_m` at all.
    pub fn uses_current_treatment(&self) -> bool {
        match self {
            Feature::A { lag: 0 } => true,
            Feature::Product { factors } => factors.iter().any(|f| f.uses_current_treatment()),
            Feature::AtOccasion { feature, occasion } => {
                feature.uses_current_treatment() || feature.has_treatment_at(*occasion)
            }
            _ => false,
        }
    }

    /// Whether the feature reads any covariate value.
    pub fn uses_covariates(&self) -> bool {
        match self {
            Feature::L { .. } | Feature::LAt { .. } => true,
            Feature::Product { factors } => factors.iter().any(Feature::uses_covariates),
            Feature::AtOccasion { feature, .. } => feature.uses_covariates(),
            _ => false,
        }
    }

    /// Replaces every reference to the current treatment `a_m` by 1; used
    /// to build estimating-function bases from blip features.
    pub fn eval_with_unit_treatment(&self, m: usize, l: &[f64], a_prev: &[f64]) -> Result<f64> {
        let mut a = a_prev[..m.min(a_prev.len())].to_vec();
        a.truncate(m);
        a.push(1.0);
        self.eval(m, l, &a)
    }

    pub fn describe(&self) -> String {
        match self {
            Feature::Intercept => "1".into(),
            Feature::L { lag: 0 } => "L[m]".into(),
            Feature::L { lag } => format!("L[m-{lag}]"),
            Feature::A { lag: 0 } => "A[m]".into(),
            Feature::A { lag } => format!("A[m-{lag}]"),
            Feature::LAt { index } => format!("L{index}"),
            Feature::AAt { index } => format!("A{index}"),
            Feature::Occasion { index } => format!("[m={index}]"),
            Feature::Product { factors } => factors
                .iter()
                .map(Feature::describe)
                .collect::<Vec<_>>()
                .join("*"),
            Feature::AtOccasion { occasion, feature } => {
                format!("{}@{occasion}", feature.describe())
            }
        }
    }
}

fn lagged(v: &[f64], m: usize, lag: usize, name: &str) -> Result<f64> {
    if lag > m {
        return Ok(0.0);
    }
    absolute(v, m - lag, name)
}

fn absolute(v: &[f64], j: usize, name: &str) -> Result<f64> {
    v.get(j).copied().ok_or_else(|| {
        Error::Contract(format!(
            "{name}{j} is not part of the supplied history (length {})",
            v.len()
        ))
    })
}

/// Parses the compact notation used in config files, and everything
/// [`Feature::describe`] prints.
///
/// `1` is the intercept; `l`, `l2`, `a1` are lags (`l` means lag 0);
/// `L2`, `A0` fix the occasion; `occ1` is the occasion indicator;
/// `*` forms products and a trailing `@j` restricts to occasion `j`.
impl std::str::FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse feature `{s}`"));
        if let Some((inner, occ)) = s.rsplit_once('@') {
            let occasion = occ.trim().parse().map_err(|_| bad())?;
            return Ok(Feature::at_occasion(occasion, inner.parse()?));
        }
        if s.contains('*') {
            let factors = s.split('*').map(str::parse).collect::<Result<Vec<Feature>>>()?;
            return Ok(Feature::product(factors));
        }
        let num = |t: &str| -> Result<usize> { t.parse().map_err(|_| bad()) };
        let bracket_lag = |t: &str| -> Result<usize> {
            match t {
                "[m]" => Ok(0),
                _ => t.strip_prefix("[m-").and_then(|r| r.strip_suffix(']')).ok_or_else(bad).and_then(num),
            }
        };
        if s == "1" || s == "intercept" {
            return Ok(Feature::Intercept);
        }
        if let Some(j) = s.strip_prefix("[m=").and_then(|r| r.strip_suffix(']')) {
            return Ok(Feature::Occasion { index: num(j)? });
        }
        if let Some(j) = s.strip_prefix("occ") {
            return Ok(Feature::Occasion { index: num(j)? });
        }
        let (head, rest) = s.split_at(s.chars().next().map_or(0, char::len_utf8));
        match head {
            "l" | "a" => {
                let lag = if rest.is_empty() { 0 } else { num(rest)? };
                Ok(if head == "l" { Feature::l(lag) } else { Feature::a(lag) })
            }
            "L" | "A" if rest.starts_with('[') => {
                let lag = bracket_lag(rest)?;
                Ok(if head == "L" { Feature::l(lag) } else { Feature::a(lag) })
            }
            "L" | "A" => {
                let index = num(rest)?;
                Ok(if head == "L" { Feature::l_at(index) } else { Feature::a_at(index) })
            }
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Feature {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Feature> for String {
    fn from(f: Feature) -> String {
        f.describe()
    }
}

impl TryFrom<Vec<Feature>> for DesignSpec {
    type Error = Error;

    fn try_from(terms: Vec<Feature>) -> Result<Self> {
        DesignSpec::new(terms)
    }
}

impl From<DesignSpec> for Vec<Feature> {
    fn from(d: DesignSpec) -> Vec<Feature> {
        d.terms
    }
}

impl DesignSpec {
    /// A design from feature strings, e.g. `["1", "l0", "a1"]`.
    pub fn parse<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        DesignSpec::new(terms.iter().map(|t| t.as_ref().parse()).collect::<Result<_>>()?)
    }
}

/// An ordered list of features producing one design row per
/// person-occasion.
///
/// Serialized as a plain list of features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct DesignSpec {
    pub terms: Vec<Feature>,
}

impl DesignSpec {
    pub fn new(terms: Vec<Feature>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("a design needs at least one term".into()));
        }
        Ok(DesignSpec { terms })
    }

    pub fn intercept() -> Self {
        DesignSpec {
            terms: vec![Feature::Intercept],
        }
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn row(&self, m: usize, l: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.eval(m, l, a)).collect()
    }

    /// Treatment models may not look at the treatment they predict.
    pub fn check_treatment_model(&self) -> Result<()> {
        if let Some(t) = self.terms.iter().find(|t| t.uses_current_treatment()) {
            return Err(Error::InvalidParameter(format!(
                "treatment-model term {} uses the current treatment",
                t.describe()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_notation_parses() {
        let f: Feature = "a0*l0".parse().unwrap();
        assert_eq!(f, Feature::product(vec![Feature::a(0), Feature::l(0)]));
        assert_eq!("l".parse::<Feature>().unwrap(), Feature::l(0));
        assert_eq!("A2".parse::<Feature>().unwrap(), Feature::a_at(2));
        assert_eq!("occ1".parse::<Feature>().unwrap(), Feature::Occasion { index: 1 });
        assert_eq!("a0@1".parse::<Feature>().unwrap(), Feature::at_occasion(1, Feature::a(0)));
        for bad in ["", "x1", "l-1", "a*", "occ", "L[m-]"] {
            assert!(bad.parse::<Feature>().is_err(), "{bad}");
        }
        assert_eq!(DesignSpec::parse(&["1", "l0", "a1"]).unwrap().width(), 3);
    }

    #[test]
    fn description_round_trips() {
        let all = [
            Feature::Intercept,
            Feature::l(0),
            Feature::l(2),
            Feature::a(0),
            Feature::a(1),
            Feature::l_at(1),
            Feature::a_at(0),
            Feature::Occasion { index: 2 },
            Feature::product(vec![Feature::a(0), Feature::l(1), Feature::a_at(1)]),
            Feature::at_occasion(1, Feature::product(vec![Feature::a(0), Feature::l(0)])),
        ];
        for f in all {
            assert_eq!(f.describe().parse::<Feature>().unwrap(), f);
        }
    }

    #[test]
    fn lags_before_start_are_zero() {
        let l = [1.0, 0.0];
        let a = [1.0];
        assert_eq!(Feature::a(1).eval(0, &l[..1], &[]).unwrap(), 0.0);
        assert_eq!(Feature::a(1).eval(1, &l, &a).unwrap(), 1.0);
        assert_eq!(Feature::l(1).eval(1, &l, &a).unwrap(), 1.0);
        assert!(Feature::a(0).eval(1, &l, &a).is_err());
    }

    #[test]
    fn products_and_occasion_masks() {
        let l = [0.0, 1.0];
        let a = [1.0, 1.0];
        let f = Feature::product(vec![Feature::a(0), Feature::a(1)]);
        assert_eq!(f.eval(1, &l, &a).unwrap(), 1.0);
        assert_eq!(f.eval(0, &l, &a).unwrap(), 0.0);
        let g = Feature::at_occasion(0, Feature::a(0));
        assert_eq!(g.eval(0, &l, &a).unwrap(), 1.0);
        assert_eq!(g.eval(1, &l, &a).unwrap(), 0.0);
        assert!(f.has_current_treatment_factor());
        assert!(g.has_current_treatment_factor());
        assert!(!Feature::l(0).has_current_treatment_factor());
    }

    #[test]
    fn treatment_model_cannot_see_current_treatment() {
        let d = DesignSpec::new(vec![Feature::Intercept, Feature::a(0)]).unwrap();
        assert!(d.check_treatment_model().is_err());
        let ok = DesignSpec::new(vec![Feature::Intercept, Feature::l(0), Feature::a(1)]).unwrap();
        assert!(ok.check_treatment_model().is_ok());
    }

    #[test]
    fn unit_treatment_basis() {
        let f = Feature::product(vec![Feature::a(0), Feature::l(0)]);
        let v = f.eval_with_unit_treatment(1, &[0.0, 3.0], &[1.0]).unwrap();
        assert_eq!(v, 3.0);
    }
}

//! Longitudinal trial data: schemas, trajectories, histories and regimes.
//!
//! Occasions are indexed `0..=K`. Subject `i` carries covariates
//! `L_0..L_K`, treatments `A_0..A_K` and a continuous outcome `Y`
//! (equivalently `L_{K+1}`). Every value is stored as `f64`; [`Kind`]
//! metadata says which values are discrete. The virtual treatment `a_{-1}`
//! is 0 wherever a feature refers to it.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value kind of a covariate or treatment column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kind {
    Binary,
    Discrete { levels: Vec<f64> },
    Continuous,
}

impl Kind {
    /// A covariate that is not measured; stored as the constant 0.
    pub fn absent() -> Self {
        Kind::Discrete { levels: vec![0.0] }
    }

    pub fn levels(&self) -> Option<Vec<f64>> {
        match self {
            Kind::Binary => Some(vec![0.0, 1.0]),
            Kind::Discrete { levels } => Some(levels.clone()),
            Kind::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Kind::Continuous)
    }

    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            Kind::Binary => v == 0.0 || v == 1.0,
            Kind::Discrete { levels } => levels.contains(&v),
            Kind::Continuous => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    /// Index of the final occasion, `K`.
    pub k: usize,
    pub covariates: Vec<Kind>,
    pub treatments: Vec<Kind>,
}

impl Schema {
    pub fn new(k: usize, covariates: Vec<Kind>, treatments: Vec<Kind>) -> Result<Self> {
        let s = Schema {
            k,
            covariates,
            treatments,
        };
        s.check()?;
        Ok(s)
    }

    /// `K + 1` covariates and treatments, all of the given kinds.
    pub fn uniform(k: usize, covariate: Kind, treatment: Kind) -> Self {
        Schema {
            k,
            covariates: vec![covariate; k + 1],
            treatments: vec![treatment; k + 1],
        }
    }

    pub fn occasions(&self) -> usize {
        self.k + 1
    }

    pub fn check(&self) -> Result<()> {
        if self.covariates.len() != self.k + 1 || self.treatments.len() != self.k + 1 {
            return Err(Error::Schema(format!(
                "K = {} needs {} covariate and treatment kinds, got {} and {}",
                self.k,
                self.k + 1,
                self.covariates.len(),
                self.treatments.len()
            )));
        }
        for (m, t) in self.treatments.iter().enumerate() {
            if let Kind::Discrete { .. } = t {
                return Err(Error::Schema(format!(
                    "treatment A{m} must be binary or continuous"
                )));
            }
        }
        for (m, c) in self.covariates.iter().enumerate() {
            if let Kind::Discrete { levels } = c {
                if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Schema(format!(
                        "covariate L{m} needs a non-empty finite level list"
                    )));
                }
            }
        }
        Ok(())
    }

    /// CSV header `L0,A0,L1,A1,...,LK,AK,Y`.
    pub fn header(&self) -> Vec<String> {
        let mut h = Vec::with_capacity(2 * self.k + 3);
        for m in 0..=self.k {
            h.push(format!("L{m}"));
            h.push(format!("A{m}"));
        }
        h.push("Y".to_string());
        h
    }
}

/// One subject's ordered record `(L_0, A_0, ..., L_K, A_K, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub y: f64,
}

impl Trajectory {
    pub fn new(l: Vec<f64>, a: Vec<f64>, y: f64) -> Self {
        Trajectory { l, a, y }
    }

    pub fn history(&self, m: usize) -> History<'_> {
        History::new(m, &self.l[..=m], &self.a[..m])
    }
}

/// Covariate history `l̄_m` together with the treatments `ā_{m-1}` that
/// preceded occasion `m`.
#[derive(Debug, Clone, Copy)]
pub struct History<'a> {
    pub m: usize,
    pub l_bar: &'a [f64],
    pub a_bar_prev: &'a [f64],
}

impl<'a> History<'a> {
    pub fn new(m: usize, l_bar: &'a [f64], a_bar_prev: &'a [f64]) -> Self {
        debug_assert_eq!(l_bar.len(), m + 1);
        debug_assert_eq!(a_bar_prev.len(), m);
        History {
            m,
            l_bar,
            a_bar_prev,
        }
    }

    /// `a_{m-1}`, zero at `m = 0`.
    pub fn last_treatment(&self) -> f64 {
        self.a_bar_prev.last().copied().unwrap_or(0.0)
    }

    pub fn current_covariate(&self) -> f64 {
        self.l_bar[self.m]
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Schema,
    pub rows: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Trajectory>) -> Result<Self> {
        let d = Dataset { schema, rows };
        validate(&d)?;
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.schema.k
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }

    pub fn covariate(&self, m: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.l[m]).collect()
    }

    pub fn treatment(&self, m: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.a[m]).collect()
    }

    /// Requires the two-occasion shape `(L, A0, A1, Y)` with `L` stored
    /// as `L1` and `L0` unmeasured (constant 0).
    pub fn require_two_occasion(&self, what: &str) -> Result<()> {
        if self.schema.k != 1 {
            return Err(Error::Contract(format!(
                "{what} needs K = 1 data, got K = {}",
                self.schema.k
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.schema.header())?;
        for r in &self.rows {
            let mut rec = Vec::with_capacity(2 * self.schema.k + 3);
            for m in 0..=self.schema.k {
                rec.push(format_float(r.l[m]));
                rec.push(format_float(r.a[m]));
            }
            rec.push(format_float(r.y));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(schema: Schema, r: R) -> Result<Self> {
        schema.check()?;
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let expected = schema.header();
        if header != expected {
            return Err(Error::Csv(format!(
                "header mismatch: expected {}, found {}",
                expected.join(","),
                header.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    s.trim().parse::<f64>().map_err(|_| Error::Validation {
                        row: i,
                        field: expected[j].clone(),
                        reason: format!("cannot parse {s:?} as a number"),
                    })
                })
                .collect::<Result<_>>()?;
            let mut l = Vec::with_capacity(schema.k + 1);
            let mut a = Vec::with_capacity(schema.k + 1);
            for m in 0..=schema.k {
                l.push(vals[2 * m]);
                a.push(vals[2 * m + 1]);
            }
            rows.push(Trajectory::new(l, a, vals[2 * schema.k + 2]));
        }
        Dataset::new(schema, rows)
    }
}

/// Shortest decimal representation that round-trips.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Checks that every row conforms to the schema; reports the first
/// offending row and field.
pub fn validate(dataset: &Dataset) -> Result<()> {
    let s = &dataset.schema;
    s.check()?;
    if dataset.rows.is_empty() {
        return Err(Error::Validation {
            row: 0,
            field: "rows".into(),
            reason: "dataset has no rows".into(),
        });
    }
    let occ = s.k + 1;
    for (i, r) in dataset.rows.iter().enumerate() {
        if r.l.len() != occ {
            return Err(Error::Validation {
                row: i,
                field: "L".into(),
                reason: format!("expected {occ} covariates, found {}", r.l.len()),
            });
        }
        if r.a.len() != occ {
            return Err(Error::Validation {
                row: i,
                field: "A".into(),
                reason: format!("expected {occ} treatments, found {}", r.a.len()),
            });
        }
        for m in 0..occ {
            check_value(i, &format!("L{m}"), &s.covariates[m], r.l[m])?;
            check_value(i, &format!("A{m}"), &s.treatments[m], r.a[m])?;
        }
        if !r.y.is_finite() {
            return Err(Error::Validation {
                row: i,
                field: "Y".into(),
                reason: "non-finite outcome".into(),
            });
        }
    }
    Ok(())
}

fn check_value(row: usize, field: &str, kind: &Kind, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Validation {
            row,
            field: field.into(),
            reason: "non-finite value".into(),
        });
    }
    if !kind.contains(v) {
        return Err(Error::Validation {
            row,
            field: field.into(),
            reason: format!("level violation: {v} is not a declared level"),
        });
    }
    Ok(())
}

pub type RuleFn = dyn Fn(&History<'_>) -> f64 + Send + Sync;

/// A treatment regime `g = (g_0, ..., g_K)`.
#[derive(Clone)]
pub enum Regime {
    /// The non-dynamic plan `ā* = (a_0*, ..., a_K*)`.
    Static(Vec<f64>),
    /// `g_m(l̄_m)` for each occasion.
    Dynamic { name: String, rule: Arc<RuleFn> },
}

impl fmt::Debug for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Static(plan) => write!(f, "Static({plan:?})"),
            Regime::Dynamic { name, .. } => write!(f, "Dynamic({name})"),
        }
    }
}

impl Regime {
    pub fn fixed(plan: &[f64]) -> Self {
        Regime::Static(plan.to_vec())
    }

    pub fn dynamic<F>(name: &str, rule: F) -> Self
    where
        F: Fn(&History<'_>) -> f64 + Send + Sync + 'static,
    {
        Regime::Dynamic {
            name: name.to_string(),
            rule: Arc::new(rule),
        }
    }

    /// Treat at occasion `m` iff the current covariate `l_m` is 1.
    pub fn follow_covariate() -> Self {
        Regime::dynamic("follow-covariate", |h| h.current_covariate())
    }

    pub fn name(&self) -> String {
        match self {
            Regime::Static(plan) => {
                let p: Vec<String> = plan.iter().map(|v| format!("{v}")).collect();
                format!("static({})", p.join(","))
            }
            Regime::Dynamic { name, .. } => name.clone(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Regime::Static(_))
    }
}

/// `g_m(l̄_m)`, checked against the treatment support for occasion `m`.
pub fn apply_regime(regime: &Regime, hist: &History<'_>, support: &Kind) -> Result<f64> {
    let v = match regime {
        Regime::Static(plan) => *plan.get(hist.m).ok_or_else(|| {
            Error::Contract(format!(
                "static plan has {} occasions, occasion {} requested",
                plan.len(),
                hist.m
            ))
        })?,
        Regime::Dynamic { rule, .. } => rule(hist),
    };
    if !support.contains(v) {
        return Err(Error::OutOfSupport {
            occasion: hist.m,
            value: v,
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> Schema {
        Schema::new(1, vec![Kind::absent(), Kind::Binary], vec![Kind::Continuous; 2]).unwrap()
    }

    #[test]
    fn well_formed_row_validates() {
        let d = Dataset::new(k1(), vec![Trajectory::new(vec![0.0, 1.0], vec![0.3, -1.2], 2.5)]);
        assert!(d.is_ok());
    }

    #[test]
    fn level_violation_reports_row_and_field() {
        let rows = vec![
            Trajectory::new(vec![0.0, 1.0], vec![0.0, 0.0], 1.0),
            Trajectory::new(vec![0.0, 2.0], vec![0.0, 0.0], 1.0),
        ];
        match Dataset::new(k1(), rows) {
            Err(Error::Validation { row, field, reason }) => {
                assert_eq!(row, 1);
                assert_eq!(field, "L1");
                assert!(reason.contains("level violation"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_outcome_rejected() {
        let rows = vec![Trajectory::new(vec![0.0, 1.0], vec![0.0, 0.0], f64::NAN)];
        match Dataset::new(k1(), rows) {
            Err(Error::Validation { field, reason, .. }) => {
                assert_eq!(field, "Y");
                assert!(reason.contains("non-finite outcome"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let rows = vec![Trajectory::new(vec![0.0], vec![0.0, 0.0], 1.0)];
        assert!(matches!(Dataset::new(k1(), rows), Err(Error::Validation { .. })));
    }

    #[test]
    fn static_regime_ignores_history() {
        let g = Regime::fixed(&[1.0, 0.0]);
        let l = [0.0, 1.0];
        let a = [1.0];
        let h = History::new(1, &l, &a);
        assert_eq!(apply_regime(&g, &h, &Kind::Binary).unwrap(), 0.0);
        let g0 = Regime::fixed(&[0.0, 0.0]);
        let h0 = History::new(0, &l[..1], &[]);
        assert_eq!(apply_regime(&g0, &h0, &Kind::Binary).unwrap(), 0.0);
    }

    #[test]
    fn dynamic_rule_evaluates() {
        let g = Regime::follow_covariate();
        let l = [0.0, 1.0];
        let h = History::new(1, &l, &[0.0]);
        assert_eq!(apply_regime(&g, &h, &Kind::Binary).unwrap(), 1.0);
    }

    #[test]
    fn out_of_support_rule_is_error() {
        let g = Regime::dynamic("bad", |_| 0.5);
        let l = [0.0];
        let h = History::new(0, &l, &[]);
        assert!(matches!(
            apply_regime(&g, &h, &Kind::Binary),
            Err(Error::OutOfSupport { occasion: 0, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(
            k1(),
            vec![
                Trajectory::new(vec![0.0, 1.0], vec![0.1, -0.25], 3.0),
                Trajectory::new(vec![0.0, 0.0], vec![1e-17, 2.0], -1.5),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("L0,A0,L1,A1,Y\n"));
        let back = Dataset::read_csv(k1(), buf.as_slice()).unwrap();
        assert_eq!(back.rows, d.rows);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn static_regimes_are_history_free(
                plan in proptest::collection::vec(0u8..2, 3),
                l1 in proptest::collection::vec(0u8..2, 3),
                l2 in proptest::collection::vec(0u8..2, 3),
                m in 0usize..3,
            ) {
                let plan: Vec<f64> = plan.into_iter().map(f64::from).collect();
                let l1: Vec<f64> = l1.into_iter().map(f64::from).collect();
                let l2: Vec<f64> = l2.into_iter().map(f64::from).collect();
                let g = Regime::Static(plan);
                let a = vec![1.0; m];
                let h1 = History::new(m, &l1[..=m], &a);
                let h2 = History::new(m, &l2[..=m], &a);
                prop_assert_eq!(
                    apply_regime(&g, &h1, &Kind::Binary).unwrap(),
                    apply_regime(&g, &h2, &Kind::Binary).unwrap()
                );
            }
        }
    }
}

//! Exact joint probability tables of discrete observables.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{format_float, Schema};
use crate::error::{Error, Result};
use crate::stats::normal_cdf;

/// Probabilities below this are treated as zero in conditioning events.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Outcome categories. For `Binned { edges }` category `c` is the interval
/// `(e_{c-1}, e_c]` with `e_{-1} = -∞` and `e_B = +∞`; for `Discrete` it is
/// the point `values[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum YAxis {
    Binned { edges: Vec<f64> },
    Discrete { values: Vec<f64> },
}

impl YAxis {
    pub fn categories(&self) -> usize {
        match self {
            YAxis::Binned { edges } => edges.len() + 1,
            YAxis::Discrete { values } => values.len(),
        }
    }

    /// Grid points `g_j` at which survivors `pr[Y > g_j]` are reported.
    pub fn grid(&self) -> &[f64] {
        match self {
            YAxis::Binned { edges } => edges,
            YAxis::Discrete { values } => values,
        }
    }

    /// A value inside category `c`: bin midpoints, or one unit past the
    /// outer edges for the two unbounded bins.
    pub fn representative(&self, c: usize) -> f64 {
        match self {
            YAxis::Discrete { values } => values[c],
            YAxis::Binned { edges } => {
                let b = edges.len();
                if c == 0 {
                    edges[0] - 1.0
                } else if c == b {
                    edges[b - 1] + 1.0
                } else {
                    0.5 * (edges[c - 1] + edges[c])
                }
            }
        }
    }

    pub fn category_of(&self, y: f64) -> Option<usize> {
        match self {
            YAxis::Binned { edges } => Some(edges.iter().filter(|&&e| y > e).count()),
            YAxis::Discrete { values } => values.iter().position(|&v| (v - y).abs() <= 1e-9),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    /// Outcome category index on the table's axis.
    pub y: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub schema: Schema,
    pub axis: YAxis,
    pub cells: Vec<Cell>,
}

fn key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| (x + 0.0).to_bits()).collect()
}

fn round_y(y: f64) -> i64 {
    (y * 1e9).round() as i64
}

/// Collects probability mass cell by cell during enumeration.
pub(crate) struct Accumulator {
    schema: Schema,
    bins: Option<Vec<f64>>,
    mass: HashMap<(Vec<u64>, Vec<u64>, i64), f64>,
    histories: HashMap<(Vec<u64>, Vec<u64>), (Vec<f64>, Vec<f64>)>,
}

impl Accumulator {
    pub(crate) fn new(schema: Schema, bins: Option<&[f64]>) -> Result<Self> {
        if let Some(b) = bins {
            if b.is_empty() || b.windows(2).any(|w| !(w[0] < w[1])) || b.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidParameter("y bins must be finite and strictly increasing".into()));
            }
        }
        Ok(Accumulator {
            schema,
            bins: bins.map(<[f64]>::to_vec),
            mass: HashMap::new(),
            histories: HashMap::new(),
        })
    }

    fn entry(&mut self, l: &[f64], a: &[f64], ykey: i64, p: f64) {
        let (kl, ka) = (key(l), key(a));
        self.histories
            .entry((kl.clone(), ka.clone()))
            .or_insert_with(|| (l.to_vec(), a.to_vec()));
        *self.mass.entry((kl, ka, ykey)).or_insert(0.0) += p;
    }

    pub(crate) fn add_point(&mut self, l: &[f64], a: &[f64], y: f64, p: f64) {
        match &self.bins {
            Some(edges) => {
                let c = edges.iter().filter(|&&e| y > e).count() as i64;
                self.entry(l, a, c, p);
            }
            None => self.entry(l, a, round_y(y), p),
        }
    }

    pub(crate) fn add_normal(&mut self, l: &[f64], a: &[f64], mean: f64, sd: f64, p: f64) {
        let edges = self.bins.clone().expect("normal outcome mass needs bins");
        if sd == 0.0 {
            self.add_point(l, a, mean, p);
            return;
        }
        let mut prev = 0.0;
        for (c, e) in edges.iter().enumerate() {
            let cdf = normal_cdf((e - mean) / sd);
            self.entry(l, a, c as i64, p * (cdf - prev));
            prev = cdf;
        }
        self.entry(l, a, edges.len() as i64, p * (1.0 - prev));
    }

    pub(crate) fn finish(self) -> Result<JointTable> {
        let axis = match &self.bins {
            Some(edges) => YAxis::Binned { edges: edges.clone() },
            None => {
                let mut vals: Vec<i64> = self.mass.keys().map(|k| k.2).collect();
                vals.sort_unstable();
                vals.dedup();
                YAxis::Discrete {
                    values: vals.iter().map(|&v| v as f64 / 1e9).collect(),
                }
            }
        };
        let index: HashMap<i64, usize> = match &axis {
            YAxis::Binned { edges } => (0..=edges.len()).map(|c| (c as i64, c)).collect(),
            YAxis::Discrete { values } => values.iter().enumerate().map(|(c, v)| (round_y(*v), c)).collect(),
        };
        let mut cells: Vec<Cell> = self
            .mass
            .into_iter()
            .map(|((kl, ka, ky), prob)| {
                let (l, a) = self.histories[&(kl, ka)].clone();
                Cell { l, a, y: index[&ky], prob }
            })
            .collect();
        cells.sort_by(|x, y| {
            let kx: Vec<f64> = x.l.iter().chain(&x.a).copied().collect();
            let ky: Vec<f64> = y.l.iter().chain(&y.a).copied().collect();
            kx.partial_cmp(&ky).unwrap().then(x.y.cmp(&y.y))
        });
        JointTable::new(self.schema, axis, cells)
    }
}

impl JointTable {
    pub fn new(schema: Schema, axis: YAxis, cells: Vec<Cell>) -> Result<Self> {
        if cells.iter().any(|c| !(c.prob >= 0.0) || c.y >= axis.categories()) {
            return Err(Error::InvalidParameter("cell probabilities must be nonnegative with valid categories".into()));
        }
        let t = JointTable { schema, axis, cells };
        let total = t.total();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("table probabilities sum to {total}")));
        }
        Ok(t)
    }

    pub fn k(&self) -> usize {
        self.schema.k
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().map(|c| c.prob).sum()
    }

    pub fn y_value(&self, cell: &Cell) -> f64 {
        self.axis.representative(cell.y)
    }

    /// `pr(l̄_j, ā_{j'})` for prefixes of any lengths.
    pub fn mass(&self, l_prefix: &[f64], a_prefix: &[f64]) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.l.starts_with(l_prefix) && c.a.starts_with(a_prefix))
            .map(|c| c.prob)
            .sum()
    }

    /// `E[f(cell, y)]` over the table.
    pub fn expectation<F: Fn(&Cell, f64) -> f64>(&self, f: F) -> f64 {
        self.cells.iter().map(|c| c.prob * f(c, self.y_value(c))).sum()
    }

    /// Outcome category probabilities given the full history.
    pub fn outcome_given(&self, l: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        let mut p = vec![0.0; self.axis.categories()];
        let mut total = 0.0;
        for c in self.cells.iter().filter(|c| c.l == l && c.a == a) {
            p[c.y] += c.prob;
            total += c.prob;
        }
        if total < POSITIVITY_FLOOR {
            return Err(Error::Positivity(format!("history L = {l:?}, A = {a:?} has probability {total:e}")));
        }
        for v in &mut p {
            *v /= total;
        }
        Ok(p)
    }

    /// `pr[Y > g_j | l̄_K, ā_K]` at each grid point.
    pub fn survivor_given(&self, l: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        Ok(survivor_from_categories(&self.outcome_given(l, a)?, self.axis.grid().len()))
    }

    pub fn marginal_survivor(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.axis.categories()];
        for c in &self.cells {
            p[c.y] += c.prob;
        }
        survivor_from_categories(&p, self.axis.grid().len())
    }

    /// Conditional law of `L_m` given `(l̄_{m-1}, ā_{m-1})` as
    /// `(level, probability)` pairs with positive mass.
    pub fn covariate_given(&self, m: usize, l_prev: &[f64], a_prev: &[f64]) -> Result<Vec<(f64, f64)>> {
        let denom = self.mass(l_prev, a_prev);
        if denom < POSITIVITY_FLOOR {
            return Err(Error::Positivity(format!(
                "history L = {l_prev:?}, A = {a_prev:?} at occasion {m} has probability {denom:e}"
            )));
        }
        let levels = self.schema.covariates[m]
            .levels()
            .ok_or_else(|| Error::NotEnumerable(format!("L{m} is continuous")))?;
        let mut out = Vec::new();
        let mut prefix = l_prev.to_vec();
        prefix.push(0.0);
        for v in levels {
            prefix[m] = v;
            let p = self.mass(&prefix, a_prev) / denom;
            if p > 0.0 {
                out.push((v, p));
            }
        }
        Ok(out)
    }

    /// CSV with columns `L0,A0,...,LK,AK,Y,prob`; `Y` is the category
    /// representative.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = self.schema.header();
        header.push("prob".into());
        wr.write_record(&header)?;
        for c in &self.cells {
            let mut rec = Vec::with_capacity(header.len());
            for m in 0..=self.k() {
                rec.push(format_float(c.l[m]));
                rec.push(format_float(c.a[m]));
            }
            rec.push(format_float(self.y_value(c)));
            rec.push(format_float(c.prob));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `S(g_j) = Σ_{c > j} p_c`.
pub fn survivor_from_categories(p: &[f64], grid: usize) -> Vec<f64> {
    let mut s = vec![0.0; grid];
    let mut tail = 0.0;
    for j in (0..grid).rev() {
        tail += p.get(j + 1).copied().unwrap_or(0.0);
        s[j] = tail;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Kind;

    fn toy() -> JointTable {
        let schema = Schema::uniform(0, Kind::Binary, Kind::Binary);
        let axis = YAxis::Discrete { values: vec![0.0, 1.0] };
        let cells = vec![
            Cell { l: vec![0.0], a: vec![0.0], y: 0, prob: 0.2 },
            Cell { l: vec![0.0], a: vec![1.0], y: 1, prob: 0.3 },
            Cell { l: vec![1.0], a: vec![0.0], y: 1, prob: 0.1 },
            Cell { l: vec![1.0], a: vec![1.0], y: 0, prob: 0.4 },
        ];
        JointTable::new(schema, axis, cells).unwrap()
    }

    #[test]
    fn normalisation_is_checked() {
        let t = toy();
        assert!((t.total() - 1.0).abs() < 1e-15);
        let mut bad = t.cells.clone();
        bad[0].prob = 0.5;
        assert!(JointTable::new(t.schema.clone(), t.axis.clone(), bad).is_err());
    }

    #[test]
    fn survivors_and_conditionals() {
        let t = toy();
        assert_eq!(t.marginal_survivor(), vec![0.4, 0.0]);
        assert_eq!(t.survivor_given(&[0.0], &[1.0]).unwrap(), vec![1.0, 0.0]);
        let lc = t.covariate_given(0, &[], &[]).unwrap();
        assert!((lc[0].1 - 0.5).abs() < 1e-15);
        assert!(matches!(t.covariate_given(1, &[2.0], &[]), Err(Error::Positivity(_))));
    }

    #[test]
    fn binned_categories() {
        let axis = YAxis::Binned { edges: vec![0.0, 1.0] };
        assert_eq!(axis.category_of(-1.0), Some(0));
        assert_eq!(axis.category_of(0.0), Some(0));
        assert_eq!(axis.category_of(0.5), Some(1));
        assert_eq!(axis.category_of(3.0), Some(2));
        assert_eq!(axis.representative(0), -1.0);
        assert_eq!(axis.representative(1), 0.5);
        assert_eq!(axis.representative(2), 2.0);
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        toy().write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("L0,A0,Y,prob\n"));
        assert_eq!(s.lines().count(), 5);
    }
}

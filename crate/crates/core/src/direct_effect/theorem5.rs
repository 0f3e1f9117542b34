//! Moment characterisation of the direct-effect blip: at the true `ψ`,
//! `E[t_m(A̲_{Z(m+1)}, H(ψ)) / W_{m+1} | Ā_m, L̄_m]` does not depend on
//! `A_{Pm}`.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::direct_effect::estimate::{split_indices, DeSndmSpec};
use crate::direct_effect::weights::{IpwWeights, SplitSchema, TreatmentDensity};
use crate::error::{Error, Result};
use crate::simulate::JointTable;
use crate::sndm::blip::h_from_indices;

/// `t_m(future Z treatments, H)`.
pub type MomentFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstancyReport {
    pub psi: Vec<f64>,
    /// Largest spread across `A_{Pm}` levels, per occasion; 0 at `Z`
    /// occasions.
    pub deviation: Vec<f64>,
    pub max_deviation: f64,
}

type Key = (Vec<u64>, Vec<u64>);

fn key(l: &[f64], a: &[f64]) -> Key {
    (l.iter().map(|v| v.to_bits()).collect(), a.iter().map(|v| v.to_bits()).collect())
}

fn future_z(split: &SplitSchema, a: &[f64], from: usize) -> Vec<f64> {
    (from..a.len()).filter(|&k| !split.is_p(k)).map(|k| a[k]).collect()
}

/// Accumulated `(mass, Σ mass · t / W)` per history `(l̄_m, ā_{m-1})` and
/// level of `a_m`.
type Groups = BTreeMap<Key, BTreeMap<u64, (f64, f64)>>;

fn spread(groups: &Groups, m: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for levels in groups.values() {
        let mut vals = Vec::new();
        for (mass, acc) in levels.values() {
            if !(*mass > 0.0) {
                return Err(Error::Positivity(format!("a conditioning cell at occasion {m} has zero probability")));
            }
            vals.push(acc / mass);
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("conditional moment at occasion {m} is {v}")));
        }
        if vals.len() > 1 {
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

fn finish(psi: &[f64], deviation: Vec<f64>) -> ConstancyReport {
    let max_deviation = deviation.iter().copied().fold(0.0, f64::max);
    ConstancyReport {
        psi: psi.to_vec(),
        deviation,
        max_deviation,
    }
}

/// Exact evaluation on an all-discrete joint table.
pub fn theorem5_check(table: &JointTable, split: &SplitSchema, spec: &DeSndmSpec, psi: &[f64], t: &MomentFn) -> Result<ConstancyReport> {
    let occ = table.k() + 1;
    if split.roles.len() != occ {
        return Err(Error::InvalidParameter("split and table disagree on K".into()));
    }
    let blip = spec.blip.with_psi(psi);
    blip.check()?;
    let mut deviation = vec![0.0; occ];
    for (m, dev) in deviation.iter_mut().enumerate() {
        if !split.is_p(m) {
            continue;
        }
        let mut groups = Groups::new();
        for c in &table.cells {
            let h = h_from_indices(&blip, table.y_value(c), &split_indices(&blip, split, &c.l, &c.a, psi)?).h;
            let mut w = 1.0;
            for k in (m + 1)..occ {
                if !split.is_p(k) {
                    let joint = table.mass(&c.l[..=k], &c.a[..=k]);
                    let hist = table.mass(&c.l[..=k], &c.a[..k]);
                    w *= joint / hist;
                }
            }
            let v = t(&future_z(split, &c.a, m + 1), h) / w;
            let e = groups
                .entry(key(&c.l[..=m], &c.a[..m]))
                .or_default()
                .entry(c.a[m].to_bits())
                .or_insert((0.0, 0.0));
            e.0 += c.prob;
            e.1 += c.prob * v;
        }
        *dev = spread(&groups, m)?;
    }
    Ok(finish(psi, deviation))
}

/// Empirical version on a discrete dataset with the `A_Z` laws given.
pub fn theorem5_check_sample(
    dataset: &Dataset,
    split: &SplitSchema,
    spec: &DeSndmSpec,
    az_models: &[Option<TreatmentDensity>],
    psi: &[f64],
    t: &MomentFn,
) -> Result<ConstancyReport> {
    let weights = IpwWeights::new(dataset, split, az_models)?;
    let blip = spec.blip.with_psi(psi);
    blip.check()?;
    let occ = dataset.k() + 1;
    let mut deviation = vec![0.0; occ];
    for (m, dev) in deviation.iter_mut().enumerate() {
        if !split.is_p(m) {
            continue;
        }
        let mut groups = Groups::new();
        for (i, row) in dataset.rows.iter().enumerate() {
            let h = h_from_indices(&blip, row.y, &split_indices(&blip, split, &row.l, &row.a, psi)?).h;
            let v = t(&future_z(split, &row.a, m + 1), h) / weights.wm_per_subject[i][m + 1];
            let e = groups
                .entry(key(&row.l[..=m], &row.a[..m]))
                .or_default()
                .entry(row.a[m].to_bits())
                .or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += v;
        }
        *dev = spread(&groups, m)?;
    }
    Ok(finish(psi, deviation))
}

//! Ingestion, cohort partitioning, resampling and synthetic data.

mod csvio;
mod grid;
mod synth;

pub use csvio::{load_csv, read_csv, save_csv, write_csv, Row, Schema, Table};
pub use grid::{grid_search, Grid, GridResult};
pub use synth::{synth_generate, SynthSpec};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeasibleSet, Instance};
use crate::error::{input, Result};

/// One raw encounter before labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub fell: bool,
    pub targeted_intervention: bool,
    pub weight: f64,
}

impl EncounterRecord {
    pub fn new(id: impl Into<String>, features: Vec<f64>, fell: bool, targeted_intervention: bool) -> Self {
        EncounterRecord { id: id.into(), features, fell, targeted_intervention, weight: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CohortCounts {
    /// Fell, labelled with the highest category.
    pub fall: usize,
    /// Did not fall and received no targeted intervention, labelled lowest.
    pub reference: usize,
    /// Did not fall but was intervened on; unlabelled.
    pub intervention: usize,
}

impl CohortCounts {
    pub fn total(&self) -> usize {
        self.fall + self.reference + self.intervention
    }
}

/// Labelled training pool plus the intervention holdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub train: Dataset,
    pub train_ids: Vec<String>,
    /// Intervention encounters, carried with the full feasible set.
    pub holdout: Dataset,
    pub holdout_ids: Vec<String>,
    pub counts: CohortCounts,
}

/// Routes every record to exactly one cohort.
///
/// A fall is high risk whatever interventions were applied. Without a fall,
/// an untreated encounter is low risk, while a treated one has an unknown
/// counterfactual and goes to the holdout with every category feasible.
pub fn partition_cohorts(records: &[EncounterRecord], feature_names: &[String], num_categories: usize) -> Result<Partition> {
    let p = feature_names.len();
    let mut train = Vec::new();
    let mut train_ids = Vec::new();
    let mut holdout = Vec::new();
    let mut holdout_ids = Vec::new();
    let mut counts = CohortCounts { fall: 0, reference: 0, intervention: 0 };
    for r in records {
        if r.features.len() != p {
            return input(format!("record {} has {} features, expected {p}", r.id, r.features.len()));
        }
        let (set, to_train) = match (r.fell, r.targeted_intervention) {
            (true, _) => {
                counts.fall += 1;
                (FeasibleSet::singleton(num_categories), true)
            }
            (false, false) => {
                counts.reference += 1;
                (FeasibleSet::singleton(1), true)
            }
            (false, true) => {
                counts.intervention += 1;
                (FeasibleSet::full(num_categories), false)
            }
        };
        let inst = Instance::new(r.features.clone(), set, r.weight)?;
        if to_train {
            train.push(inst);
            train_ids.push(r.id.clone());
        } else {
            holdout.push(inst);
            holdout_ids.push(r.id.clone());
        }
    }
    let names = feature_names.to_vec();
    Ok(Partition {
        train: Dataset::new(train, names.clone(), num_categories, Vec::new())?,
        train_ids,
        holdout: Dataset::new(holdout, names, num_categories, Vec::new())?,
        holdout_ids,
        counts,
    })
}

/// Row indices grouped by feasible set, in a fixed order.
fn strata(d: &Dataset) -> BTreeMap<FeasibleSet, Vec<usize>> {
    let mut map: BTreeMap<FeasibleSet, Vec<usize>> = BTreeMap::new();
    for (i, inst) in d.instances.iter().enumerate() {
        map.entry(inst.feasible).or_default().push(i);
    }
    map
}

/// Train and test row indices, stratified by feasible set.
pub fn stratified_split_indices(d: &Dataset, test_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_frac) {
        return input(format!("test fraction {test_frac} outside [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (set, mut rows) in strata(d) {
        if rows.len() < 2 {
            log::warn!("stratum {set} has {} row(s); kept entirely in training", rows.len());
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let take = (test_frac * rows.len() as f64).round() as usize;
        test.extend_from_slice(&rows[..take]);
        train.extend_from_slice(&rows[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(d: &Dataset, test_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(d, test_frac, seed)?;
    Ok((d.subset(&train), d.subset(&test)))
}

/// Validation row indices of `k` stratified folds.
pub fn kfold_indices(d: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return input("cross-validation needs at least two folds");
    }
    let groups = strata(d);
    if let Some((set, rows)) = groups.iter().find(|(_, rows)| rows.len() < k) {
        return input(format!("stratum {set} has {} rows, fewer than {k} folds", rows.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (_, mut rows) in groups {
        rows.shuffle(&mut rng);
        for (pos, i) in rows.iter().enumerate() {
            folds[(pos + offset) % k].push(*i);
        }
        offset += rows.len();
    }
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(folds)
}

/// `(train, validation)` pairs for stratified `k`-fold cross-validation.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let folds = kfold_indices(d, k, seed)?;
    Ok(folds
        .iter()
        .map(|val| {
            let mut in_val = vec![false; d.len()];
            for &i in val {
                in_val[i] = true;
            }
            let train: Vec<usize> = (0..d.len()).filter(|&i| !in_val[i]).collect();
            (d.subset(&train), d.subset(val))
        })
        .collect())
}

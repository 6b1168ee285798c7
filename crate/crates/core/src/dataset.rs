//! Partially labeled instances and datasets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{input, Error, Result};

/// Largest number of ordinal categories a [`FeasibleSet`] can hold.
pub const MAX_CATEGORIES: usize = 64;

/// Set of categories (1-based) an instance may truly belong to, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FeasibleSet(u64);

impl FeasibleSet {
    pub const EMPTY: FeasibleSet = FeasibleSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FeasibleSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(k: usize) -> Self {
        assert!((1..=MAX_CATEGORIES).contains(&k), "category {k} out of range");
        FeasibleSet(1u64 << (k - 1))
    }

    /// `{1..=num_categories}`.
    pub fn full(num_categories: usize) -> Self {
        assert!((1..=MAX_CATEGORIES).contains(&num_categories));
        if num_categories == 64 {
            FeasibleSet(u64::MAX)
        } else {
            FeasibleSet((1u64 << num_categories) - 1)
        }
    }

    pub fn from_categories<I: IntoIterator<Item = usize>>(cats: I) -> Result<Self> {
        let mut bits = 0u64;
        for k in cats {
            if !(1..=MAX_CATEGORIES).contains(&k) {
                return input(format!("category {k} outside 1..={MAX_CATEGORIES}"));
            }
            bits |= 1u64 << (k - 1);
        }
        Ok(FeasibleSet(bits))
    }

    pub fn contains(self, k: usize) -> bool {
        (1..=MAX_CATEGORIES).contains(&k) && self.0 & (1u64 << (k - 1)) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// The single member, if this is a singleton.
    pub fn as_singleton(self) -> Option<usize> {
        (self.len() == 1).then(|| self.0.trailing_zeros() as usize + 1)
    }

    pub fn max(self) -> Option<usize> {
        (!self.is_empty()).then(|| 64 - self.0.leading_zeros() as usize)
    }

    pub fn min(self) -> Option<usize> {
        (!self.is_empty()).then(|| self.0.trailing_zeros() as usize + 1)
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k + 1)
            }
        })
    }
}

impl fmt::Debug for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Pipe-separated form used in data files: `1|2|3`.
impl fmt::Display for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|k| k.to_string()).collect();
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for FeasibleSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(FeasibleSet::EMPTY);
        }
        let cats = s
            .split('|')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Input(format!("bad category `{part}` in feasible set `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeasibleSet::from_categories(cats)
    }
}

impl Serialize for FeasibleSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FeasibleSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let cats = Vec::<usize>::deserialize(deserializer)?;
        FeasibleSet::from_categories(cats).map_err(serde::de::Error::custom)
    }
}

/// One training or evaluation unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub feasible: FeasibleSet,
    pub weight: f64,
}

impl Instance {
    pub fn new(features: Vec<f64>, feasible: FeasibleSet, weight: f64) -> Result<Self> {
        if feasible.is_empty() {
            return input("feasible set must be non-empty");
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return input(format!("instance weight must be positive, got {weight}"));
        }
        Ok(Instance { features, feasible, weight })
    }

    /// Unit-weight instance labelled with a single category.
    pub fn labeled(features: Vec<f64>, category: usize) -> Self {
        Instance { features, feasible: FeasibleSet::singleton(category), weight: 1.0 }
    }
}

/// Ordered collection of instances sharing a feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub feature_names: Vec<String>,
    pub num_categories: usize,
    /// `(i, j)` requires `beta[i] <= beta[j]`.
    #[serde(default)]
    pub monotone_pairs: Vec<(usize, usize)>,
}

/// One invariant violation found by [`Dataset::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    TooFewCategories { num_categories: usize },
    EmptyFeasibleSet { row: usize },
    CategoryOutOfRange { row: usize, category: usize },
    NonPositiveWeight { row: usize, weight: f64 },
    DimensionMismatch { row: usize, expected: usize, found: usize },
    NonFiniteFeature { row: usize, column: usize },
    PairIndexOutOfRange { pair: (usize, usize) },
    CyclicMonotonePairs { nodes: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewCategories { num_categories } => {
                write!(f, "need at least 2 categories, got {num_categories}")
            }
            Violation::EmptyFeasibleSet { row } => write!(f, "row {row}: empty feasible set"),
            Violation::CategoryOutOfRange { row, category } => {
                write!(f, "row {row}: category {category} outside 1..=K")
            }
            Violation::NonPositiveWeight { row, weight } => {
                write!(f, "row {row}: weight {weight} is not positive")
            }
            Violation::DimensionMismatch { row, expected, found } => {
                write!(f, "row {row}: expected {expected} features, found {found}")
            }
            Violation::NonFiniteFeature { row, column } => {
                write!(f, "row {row}: feature {column} is not finite")
            }
            Violation::PairIndexOutOfRange { pair } => {
                write!(f, "monotone pair ({}, {}) indexes past the feature count", pair.0, pair.1)
            }
            Violation::CyclicMonotonePairs { nodes } => {
                write!(f, "monotone pairs contain a cycle through features {nodes:?}")
            }
        }
    }
}

/// Result of [`Dataset::validate`]; empty means the dataset is well formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Rows named by at least one violation.
    pub fn rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::EmptyFeasibleSet { row }
                | Violation::CategoryOutOfRange { row, .. }
                | Violation::NonPositiveWeight { row, .. }
                | Violation::DimensionMismatch { row, .. }
                | Violation::NonFiniteFeature { row, .. } => Some(*row),
                _ => None,
            })
            .collect();
        rows.dedup();
        rows
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            input(msgs.join("; "))
        }
    }
}

impl Dataset {
    /// Builds a dataset and rejects it if any invariant fails.
    pub fn new(
        instances: Vec<Instance>,
        feature_names: Vec<String>,
        num_categories: usize,
        monotone_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let d = Dataset { instances, feature_names, num_categories, monotone_pairs };
        d.validate().into_result()?;
        Ok(d)
    }

    /// Dataset with generated feature names `x0..x{p-1}` and no monotone pairs.
    pub fn unnamed(instances: Vec<Instance>, dim: usize, num_categories: usize) -> Result<Self> {
        let names = (0..dim).map(|j| format!("x{j}")).collect();
        Dataset::new(instances, names, num_categories, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Copy keeping only the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            num_categories: self.num_categories,
            monotone_pairs: self.monotone_pairs.clone(),
        }
    }

    /// Same schema, different rows.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Dataset {
        Dataset {
            instances,
            feature_names: self.feature_names.clone(),
            num_categories: self.num_categories,
            monotone_pairs: self.monotone_pairs.clone(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        crate::numeric::stable_sum(self.instances.iter().map(|i| i.weight))
    }

    /// Lists every invariant violation.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let p = self.dim();
        let k_max = self.num_categories;
        if !(2..=MAX_CATEGORIES).contains(&k_max) {
            violations.push(Violation::TooFewCategories { num_categories: k_max });
        }
        for (row, inst) in self.instances.iter().enumerate() {
            if inst.feasible.is_empty() {
                violations.push(Violation::EmptyFeasibleSet { row });
            } else if let Some(top) = inst.feasible.max() {
                if top > k_max {
                    violations.push(Violation::CategoryOutOfRange { row, category: top });
                }
            }
            if !(inst.weight > 0.0 && inst.weight.is_finite()) {
                violations.push(Violation::NonPositiveWeight { row, weight: inst.weight });
            }
            if inst.features.len() != p {
                violations.push(Violation::DimensionMismatch { row, expected: p, found: inst.features.len() });
            }
            if let Some(column) = inst.features.iter().position(|v| !v.is_finite()) {
                violations.push(Violation::NonFiniteFeature { row, column });
            }
        }
        let mut pairs_ok = true;
        for &pair in &self.monotone_pairs {
            if pair.0 >= p || pair.1 >= p {
                violations.push(Violation::PairIndexOutOfRange { pair });
                pairs_ok = false;
            }
        }
        if pairs_ok {
            if let Some(nodes) = find_cycle(p, &self.monotone_pairs) {
                violations.push(Violation::CyclicMonotonePairs { nodes });
            }
        }
        ValidationReport { violations }
    }
}

/// Nodes left over after topologically peeling the pair graph, i.e. those on
/// or downstream of a cycle. `None` when the graph is acyclic.
pub(crate) fn find_cycle(n: usize, pairs: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in pairs {
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = stack.pop() {
        removed[v] = true;
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                stack.push(w);
            }
        }
    }
    let rest: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    (!rest.is_empty()).then_some(rest)
}

/// Topological order of `0..n` under the pair relation, if acyclic.
pub(crate) fn topological_order(n: usize, pairs: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in pairs {
        out[a].push(b);
        indegree[b] += 1;
    }
    let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &out[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

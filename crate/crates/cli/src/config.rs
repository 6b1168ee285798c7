//! The declarative run file.
//!
//! One TOML document drives every subcommand. Paths inside it are resolved
//! against the directory holding the file. The digest covers everything except
//! the output directory, so moving the outputs does not change it.

use std::fs;
use std::path::{Path, PathBuf};

use ordscore_core::cso::{CsoParams, Regularizer};
use ordscore_core::data::{load_csv, Grid, Schema, SynthSpec};
use ordscore_core::mip::{
    variant_preset, BigMPolicy, Budget, MinimalEdit, MipConfig, PerformanceCap, ThresholdMode, Variant,
};
use ordscore_core::preset::{jhfrat, JHFRAT_THRESHOLDS};
use ordscore_core::{Dataset, LossParams, Scorecard};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, io_at, CliError, Result};
use crate::output::ScorecardFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default = "three")]
    pub num_categories: usize,
    #[serde(default)]
    pub data: DataSection,
    pub simulate: Option<SimulateSection>,
    pub fit: Option<FitSection>,
    pub evaluate: Option<EvaluateSection>,
    pub report: Option<ReportSection>,
    pub grid: Option<GridSection>,
}

fn three() -> usize {
    3
}

fn default_test_frac() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Encounter stream consumed by `partition`.
    pub records: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub monotone_pairs: Vec<(usize, usize)>,
    /// Share of the labelled pool held out for testing.
    #[serde(default = "default_test_frac")]
    pub test_frac: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { records: None, train: None, test: None, monotone_pairs: Vec::new(), test_frac: default_test_frac() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub feature_prob: Vec<f64>,
    pub true_beta: Vec<f64>,
    pub true_tau: Vec<f64>,
    pub fall_slope: f64,
    pub fall_intercept: f64,
    pub policy_slope: f64,
    pub policy_intercept: f64,
    pub incumbent_beta: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_sd: f64,
    pub feature_names: Option<Vec<String>>,
}

impl SimulateSection {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            n: self.n,
            p: self.true_beta.len(),
            feature_prob: self.feature_prob.clone(),
            true_beta: self.true_beta.clone(),
            true_tau: self.true_tau.clone(),
            fall_slope: self.fall_slope,
            fall_intercept: self.fall_intercept,
            policy_slope: self.policy_slope,
            policy_intercept: self.policy_intercept,
            incumbent_beta: self.incumbent_beta.clone(),
            noise_sd: self.noise_sd,
            seed,
        }
    }

    pub fn names(&self) -> Result<Vec<String>> {
        let p = self.true_beta.len();
        match &self.feature_names {
            Some(names) if names.len() != p => config(format!("simulate.feature_names needs {p} entries")),
            Some(names) => Ok(names.clone()),
            None => Ok((0..p).map(|j| format!("x{j}")).collect()),
        }
    }
}

/// A scorecard given either as a file written by `fit` or by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardSource {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    pub preset: Option<String>,
}

impl CardSource {
    pub fn load(&self, base: &Path) -> Result<ScorecardFile> {
        match (&self.path, &self.preset) {
            (Some(p), None) => ScorecardFile::read(&base.join(p)),
            (None, Some(name)) if name == "jhfrat" => {
                let pre = jhfrat();
                Ok(ScorecardFile::new(&pre.scorecard, pre.feature_names, String::new()))
            }
            (None, Some(name)) => config(format!("unknown scorecard preset {name:?}")),
            _ => config("a scorecard source needs exactly one of `path` or `preset`"),
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .or_else(|| self.preset.clone())
            .or_else(|| self.path.as_ref().map(|p| p.display().to_string()))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cso,
    Exact,
    #[default]
    TwoPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default)]
    pub method: Method,
    pub variant: Option<Variant>,
    pub incumbent: Option<CardSource>,
    pub loss: Option<LossParams>,
    /// Positional weights of the relaxation's boundary terms.
    pub positional: Option<Vec<f64>>,
    #[serde(default)]
    pub cso: CsoSection,
    #[serde(default)]
    pub mip: MipSection,
    /// Record wall-clock time in the solver summary (breaks byte identity).
    #[serde(default)]
    pub timing: bool,
}

/// Overrides on top of the relaxation defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CsoSection {
    pub temperature: Option<f64>,
    pub step0: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub min_gap: Option<f64>,
    pub total_gap: Option<f64>,
    pub fix_thresholds: Option<bool>,
    pub regularizer: Option<Regularizer>,
    /// Starting thresholds; the standard pair for three categories otherwise.
    pub init_tau: Option<Vec<f64>>,
}

impl CsoSection {
    pub fn params(&self, k: usize, loss: &LossParams, positional: Option<&[f64]>) -> Result<CsoParams> {
        let ones = vec![1.0; k.saturating_sub(1)];
        let mut p = CsoParams::new(k).with_loss(loss, positional.unwrap_or(&ones));
        if let Some(v) = self.temperature {
            p.temperature = v;
        }
        if let Some(v) = self.step0 {
            p.step0 = v;
        }
        if let Some(v) = self.max_iters {
            p.max_iters = v;
        }
        if let Some(v) = self.tol {
            p.tol = v;
        }
        if let Some(v) = self.min_gap {
            p.min_gap = v;
        }
        if let Some(v) = self.total_gap {
            p.total_gap = v;
        }
        if let Some(v) = self.fix_thresholds {
            p.fix_thresholds = v;
        }
        if let Some(v) = self.regularizer {
            p.regularizer = v;
        }
        p.check()?;
        Ok(p)
    }

    pub fn init(&self, dim: usize, k: usize) -> Result<Scorecard> {
        let tau = match &self.init_tau {
            Some(t) => t.clone(),
            None => default_tau(k)?,
        };
        Ok(Scorecard::new(vec![0.0; dim], tau)?)
    }
}

fn default_tau(k: usize) -> Result<Vec<f64>> {
    if k == 3 {
        Ok(JHFRAT_THRESHOLDS.to_vec())
    } else {
        config("thresholds must be given explicitly unless there are three categories")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MipSection {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub integer_weights: Option<bool>,
    #[serde(default)]
    pub risk: Vec<usize>,
    #[serde(default)]
    pub protective: Vec<usize>,
    #[serde(default)]
    pub monotone_pairs: Vec<(usize, usize)>,
    pub sparsity: Option<usize>,
    pub minimal_edit: Option<MinimalEdit>,
    #[serde(default)]
    pub groups: Vec<(usize, usize)>,
    pub thresholds: Option<ThresholdMode>,
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub enforce_margin: bool,
    pub big_m: Option<BigMPolicy>,
    #[serde(default)]
    pub caps: Vec<PerformanceCap>,
    #[serde(default)]
    pub budget: Budget,
    pub trust_radius: Option<f64>,
}

impl MipSection {
    pub fn build(&self, p: usize, k: usize, loss: LossParams) -> Result<MipConfig> {
        let thresholds = match &self.thresholds {
            Some(t) => t.clone(),
            None => ThresholdMode::Fixed { tau: default_tau(k)? },
        };
        let tau = match &thresholds {
            ThresholdMode::Fixed { tau } => tau.clone(),
            ThresholdMode::Free { .. } => Vec::new(),
        };
        let mut cfg = MipConfig::new(p, self.lower.unwrap_or(0.0), self.upper.unwrap_or(13.0), tau, loss);
        cfg.thresholds = thresholds;
        if let Some(v) = self.integer_weights {
            cfg.integer_weights = v;
        }
        cfg.risk = self.risk.clone();
        cfg.protective = self.protective.clone();
        cfg.monotone_pairs = self.monotone_pairs.clone();
        cfg.sparsity = self.sparsity;
        cfg.minimal_edit = self.minimal_edit.clone();
        cfg.groups = self.groups.clone();
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        cfg.enforce_margin = self.enforce_margin;
        if let Some(v) = self.big_m {
            cfg.big_m = v;
        }
        cfg.caps = self.caps.clone();
        self.apply_search_limits(&mut cfg);
        Ok(cfg)
    }

    /// Budget and trust radius, the only settings that also apply on top of a variant preset.
    pub fn apply_search_limits(&self, cfg: &mut MipConfig) {
        cfg.budget = self.budget;
        cfg.trust_radius = self.trust_radius;
    }

    fn is_default_apart_from_limits(&self) -> bool {
        let mut plain = self.clone();
        plain.budget = Budget::default();
        plain.trust_radius = None;
        plain == MipSection::default()
    }
}

impl FitSection {
    pub fn loss(&self) -> LossParams {
        self.loss.unwrap_or_default()
    }

    /// Integer program for this fit, from the variant preset or the explicit section.
    pub fn mip_config(&self, d: &Dataset, incumbent: Option<&Scorecard>) -> Result<MipConfig> {
        match self.variant {
            Some(v) => {
                if self.loss.is_some() {
                    return config("fit.loss cannot be combined with a variant preset");
                }
                if !self.mip.is_default_apart_from_limits() {
                    return config("a variant preset only accepts fit.mip.budget and fit.mip.trust_radius");
                }
                let mut cfg = variant_preset(v, incumbent, d)?;
                self.mip.apply_search_limits(&mut cfg);
                Ok(cfg)
            }
            None => self.mip.build(d.dim(), d.num_categories, self.loss()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub scorecard: CardSource,
    /// Baseline for score differentials (`scorecard - reference`).
    pub reference: Option<CardSource>,
    /// Defaults to `data.test`.
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub scorecards: Vec<CardSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "five")]
    pub folds: usize,
    pub alpha_under: Option<Vec<f64>>,
    pub alpha_over: Option<Vec<f64>>,
    pub lambda1: Option<Vec<f64>>,
    /// Loss used to rank grid points; symmetric by default.
    pub target: Option<LossParams>,
    #[serde(default)]
    pub cso: CsoSection,
}

fn five() -> usize {
    5
}

impl GridSection {
    pub fn grid(&self) -> Grid {
        let d = Grid::default();
        Grid {
            alpha_under: self.alpha_under.clone().unwrap_or(d.alpha_under),
            alpha_over: self.alpha_over.clone().unwrap_or(d.alpha_over),
            lambda1: self.lambda1.clone().unwrap_or(d.lambda1),
        }
    }
}

/// A parsed run file together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub digest: String,
}

impl Loaded {
    pub fn read(path: &Path, seed: Option<u64>) -> Result<Loaded> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::ConfigParse { path: path.to_path_buf(), message: e.to_string() })?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.check()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let digest = config.digest();
        Ok(Loaded { config, base, digest })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    /// `--out` wins over the file's `out`, which defaults to `out/` next to the file.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => self.resolve(self.config.out.as_deref().unwrap_or(Path::new("out"))),
        }
    }

    pub fn dataset(&self, key: &str, path: Option<&PathBuf>) -> Result<(Dataset, Vec<String>)> {
        let Some(p) = path else {
            return config(format!("{key} is not set"));
        };
        let table = load_csv(&self.resolve(p), Schema::Dataset)?;
        let ids = table.ids();
        let mut d = table.to_dataset(self.config.num_categories)?;
        d.monotone_pairs = self.config.data.monotone_pairs.clone();
        d.validate().into_result()?;
        Ok((d, ids))
    }
}

impl RunConfig {
    /// Structural checks that need no data.
    pub fn check(&self) -> Result<()> {
        if self.num_categories < 2 || self.num_categories > 63 {
            return config("num_categories must lie in 2..=63");
        }
        if !(0.0..1.0).contains(&self.data.test_frac) {
            return config("data.test_frac must lie in [0, 1)");
        }
        if let Some(fit) = &self.fit {
            if fit.variant.is_some() && fit.method == Method::Cso {
                return config("variant presets need method \"two_phase\" or \"exact\"");
            }
            if let Some(l) = &fit.loss {
                l.check()?;
            }
        }
        if let Some(r) = &self.report {
            if r.scorecards.len() < 2 {
                return config("report needs at least two scorecards");
            }
        }
        if let Some(g) = &self.grid {
            if g.folds < 2 {
                return config("grid.folds must be at least 2");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("run config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

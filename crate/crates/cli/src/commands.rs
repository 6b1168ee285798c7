use std::path::Path;

use ordscore_core::cso::fit_cso;
use ordscore_core::data::{
    grid_search, kfold, load_csv, partition_cohorts, stratified_split_indices, synth_generate, Schema, Table,
};
use ordscore_core::eval::{
    binary_labels, categorization_table, curve_points, metrics_report, score_differentials, standard_cohorts,
    write_curve_csv, Histogram,
};
use ordscore_core::mip::{fit_two_phase, solve_exact, Solution, SolverSummary, Status, WarmSource};
use ordscore_core::{empirical_risk, Dataset, Scorecard};
use serde::Serialize;

use crate::config::{CardSource, Loaded, Method};
use crate::error::{config, CliError, Result};
use crate::output::{OutDir, ScorecardFile};

/// Synthetic encounters, their cohort partition and a train/test split.
pub fn simulate(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(sim) = &run.config.simulate else {
        return config("simulate needs a [simulate] section");
    };
    let cfg = &run.config;
    let spec = sim.spec(cfg.seed);
    let names = sim.names()?;
    let records = synth_generate(&spec)?;
    out.table("records.csv", &Table::from_records(&records, &names), Schema::Encounters)?;
    let summary = split_and_write(run, &records, &names, out)?;

    out.json("truth.json", &ScorecardFile::new(&spec.true_scorecard()?, names.clone(), run.digest.clone()))?;
    if let Some(beta) = &sim.incumbent_beta {
        let inc = Scorecard::new(beta.clone(), sim.true_tau.clone())?;
        out.json("incumbent.json", &ScorecardFile::new(&inc, names, run.digest.clone()))?;
    }
    let files: Vec<_> = out.written().iter().map(|(n, h)| FileDigest { name: n.clone(), sha256: h.clone() }).collect();
    out.json("manifest.json", &Manifest { seed: cfg.seed, n: spec.n, partition: summary, files })
}

/// Cohort partition of an existing encounter file.
pub fn partition(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(path) = &run.config.data.records else {
        return config("partition needs data.records");
    };
    let table = load_csv(&run.resolve(path), Schema::Encounters)?;
    let records = table.to_records()?;
    split_and_write(run, &records, &table.feature_names, out)?;
    Ok(())
}

#[derive(Serialize)]
struct FileDigest {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    n: usize,
    partition: PartitionSummary,
    files: Vec<FileDigest>,
}

#[derive(Serialize)]
struct PartitionSummary {
    fall: usize,
    reference: usize,
    intervention: usize,
    total: usize,
    train: usize,
    test: usize,
    test_frac: f64,
}

fn split_and_write(
    run: &Loaded,
    records: &[ordscore_core::data::EncounterRecord],
    names: &[String],
    out: &mut OutDir,
) -> Result<PartitionSummary> {
    let cfg = &run.config;
    let part = partition_cohorts(records, names, cfg.num_categories)?;
    let (tr, te) = stratified_split_indices(&part.train, cfg.data.test_frac, cfg.seed)?;
    let pick = |idx: &[usize]| -> (Dataset, Vec<String>) {
        (part.train.subset(idx), idx.iter().map(|&i| part.train_ids[i].clone()).collect())
    };
    let (train, train_ids) = pick(&tr);
    let (test, test_ids) = pick(&te);
    out.table("train.csv", &Table::from_dataset(&train, Some(&train_ids)), Schema::Dataset)?;
    out.table("test.csv", &Table::from_dataset(&test, Some(&test_ids)), Schema::Dataset)?;
    out.table("holdout.csv", &Table::from_dataset(&part.holdout, Some(&part.holdout_ids)), Schema::Dataset)?;
    let c = part.counts;
    let summary = PartitionSummary {
        fall: c.fall,
        reference: c.reference,
        intervention: c.intervention,
        total: c.total(),
        train: train.len(),
        test: test.len(),
        test_frac: cfg.data.test_frac,
    };
    out.json("partition.json", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct FitSummary<'a> {
    method: Method,
    variant: Option<&'static str>,
    warm_source: Option<WarmSource>,
    training_risk: Option<f64>,
    diagnostic: Option<&'a str>,
    #[serde(flatten)]
    solver: SolverSummary,
}

#[derive(Serialize)]
struct CsoSummary {
    method: Method,
    objective: f64,
    training_risk: f64,
    iterations: usize,
    best_iteration: usize,
    termination: ordscore_core::cso::Termination,
}

pub fn fit(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(fit) = &run.config.fit else {
        return config("fit needs a [fit] section");
    };
    let (d, _) = run.dataset("data.train", run.config.data.train.as_ref())?;
    let incumbent = match &fit.incumbent {
        Some(src) => {
            let file = src.load(&run.base)?;
            let card = file.scorecard()?;
            if card.dim() != d.dim() {
                return config(format!("incumbent has {} weights but the data has {} features", card.dim(), d.dim()));
            }
            Some(card)
        }
        None => None,
    };
    let k = d.num_categories;
    let loss = fit.loss();
    let cso = fit.cso.params(k, &loss, fit.positional.as_deref())?;
    let names = d.feature_names.clone();

    if fit.method == Method::Cso {
        let init = match &incumbent {
            Some(c) if fit.cso.init_tau.is_none() => c.clone(),
            _ => fit.cso.init(d.dim(), k)?,
        };
        let (card, trace) = fit_cso(&d, &cso, &init)?;
        let mut body = Vec::new();
        trace.write_jsonl(&mut body)?;
        out.json("scorecard.json", &ScorecardFile::new(&card, names, run.digest.clone()))?;
        out.jsonl("trace.jsonl", &body)?;
        let summary = CsoSummary {
            method: Method::Cso,
            objective: trace.best_objective,
            training_risk: empirical_risk(&card, &d, &loss)?,
            iterations: trace.iterations(),
            best_iteration: trace.best_iteration,
            termination: trace.termination,
        };
        return out.json("summary.json", &summary);
    }

    let mip = fit.mip_config(&d, incumbent.as_ref())?;
    let (solution, warm_source, trace) = match fit.method {
        Method::Exact => (solve_exact(&mip, &d, incumbent.as_ref())?, None, None),
        _ => {
            let r = fit_two_phase(&d, &cso, &mip, incumbent.as_ref())?;
            (r.solution, Some(r.warm_source), Some(r.trace))
        }
    };
    if let Some(trace) = trace {
        let mut body = Vec::new();
        trace.write_jsonl(&mut body)?;
        out.jsonl("trace.jsonl", &body)?;
    }
    let training_risk = match &solution.scorecard {
        Some(c) => Some(empirical_risk(c, &d, &mip.loss)?),
        None => None,
    };
    let summary = FitSummary {
        method: fit.method,
        variant: fit.variant.map(|v| v.name()),
        warm_source,
        training_risk,
        diagnostic: solution.diagnostic.as_deref(),
        solver: solution.summary(&run.digest, fit.timing),
    };
    out.json("summary.json", &summary)?;
    if let Some(card) = &solution.scorecard {
        out.json("scorecard.json", &ScorecardFile::new(card, names, run.digest.clone()))?;
    }
    status_outcome(&solution)
}

fn status_outcome(s: &Solution) -> Result<()> {
    match s.status {
        Status::ProvenOptimal | Status::FeasibleHeuristic => Ok(()),
        Status::Infeasible => Err(CliError::Infeasible(s.diagnostic.clone().unwrap_or_else(|| "no feasible scorecard".into()))),
        Status::BudgetExhausted => Err(CliError::BudgetExhausted),
    }
}

#[derive(Serialize)]
struct DifferentialFile<'a> {
    scorecard: &'a str,
    reference: &'a str,
    mean: f64,
    std_dev: f64,
    skewness: Option<f64>,
    n: usize,
}

pub fn evaluate(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(ev) = &run.config.evaluate else {
        return config("evaluate needs an [evaluate] section");
    };
    let path = ev.dataset.as_ref().or(run.config.data.test.as_ref());
    let (d, ids) = run.dataset("evaluate.dataset or data.test", path)?;
    let card = checked_card(&ev.scorecard, run, &d)?;

    let metrics = metrics_report(&card, &d)?;
    out.json("metrics.json", &metrics)?;
    out.csv("metrics.csv", &metrics.to_csv())?;

    let table = categorization_table(&card, &standard_cohorts(&d))?;
    out.json("categorization.json", &table)?;
    out.csv("categorization.csv", &table.to_csv())?;

    let scores = card.scores(&d)?;
    let hist = Histogram::integer_bins(&scores);
    out.csv("score_histogram.csv", &hist.to_csv())?;
    out.svg("score_histogram.svg", &hist.to_svg(&format!("Scores: {}", ev.scorecard.label())))?;

    // Curves need a two-class test set; partially labelled data skips them.
    match binary_labels(&card, &d) {
        Ok((s, labels)) => {
            let mut body = Vec::new();
            write_curve_csv(&curve_points(&s, &labels)?, &mut body)?;
            out.csv("curve.csv", &String::from_utf8_lossy(&body))?;
        }
        Err(e) => log::warn!("skipping curve points: {e}"),
    }

    if let Some(rsrc) = &ev.reference {
        let reference = checked_card(rsrc, run, &d)?;
        let diff = score_differentials(&card, &reference, &d)?;
        let (a, b) = (ev.scorecard.label(), rsrc.label());
        out.json(
            "differentials.json",
            &DifferentialFile {
                scorecard: &a,
                reference: &b,
                mean: diff.mean,
                std_dev: diff.std_dev,
                skewness: diff.skewness,
                n: diff.diffs.len(),
            },
        )?;
        let mut rows = String::from("id,differential\n");
        for (id, v) in ids.iter().zip(&diff.diffs) {
            rows.push_str(&format!("{id},{v}\n"));
        }
        out.csv("differentials.csv", &rows)?;
        out.csv("differential_histogram.csv", &diff.histogram.to_csv())?;
        out.svg("differential_histogram.svg", &diff.histogram.to_svg(&format!("Score differential: {a} - {b}")))?;
    }
    Ok(())
}

fn checked_card(src: &CardSource, run: &Loaded, d: &Dataset) -> Result<Scorecard> {
    let file = src.load(&run.base)?;
    let card = file.scorecard()?;
    if card.dim() != d.dim() || card.num_categories() != d.num_categories {
        return config(format!("scorecard {} does not match the dataset shape", src.label()));
    }
    Ok(card)
}

pub const TOTAL_ROW: &str = "Total Coefficient Sum";

#[derive(Serialize)]
struct ComparisonRow {
    feature: String,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Comparison {
    scorecards: Vec<String>,
    rows: Vec<ComparisonRow>,
    total: ComparisonRow,
    thresholds: Vec<Vec<f64>>,
}

/// Coefficients of several scorecards side by side, one row per feature.
pub fn report(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(rep) = &run.config.report else {
        return config("report needs a [report] section");
    };
    let mut labels = Vec::new();
    let mut files = Vec::new();
    for src in &rep.scorecards {
        labels.push(src.label());
        files.push(src.load(&run.base)?);
    }
    let names = files[0].feature_names.clone();
    for (l, f) in labels.iter().zip(&files).skip(1) {
        if f.feature_names != names {
            return config(format!("scorecard {l} has different feature names from {}", labels[0]));
        }
    }
    let rows: Vec<ComparisonRow> = names
        .iter()
        .enumerate()
        .map(|(j, n)| ComparisonRow { feature: n.clone(), values: files.iter().map(|f| f.beta[j]).collect() })
        .collect();
    let total = ComparisonRow {
        feature: TOTAL_ROW.to_string(),
        values: files.iter().map(|f| f.beta.iter().sum()).collect(),
    };
    let thresholds = files.iter().map(|f| f.tau.clone()).collect();

    let mut csv = String::from("feature");
    for l in &labels {
        csv.push(',');
        csv.push_str(&csv_field(l));
    }
    csv.push('\n');
    for r in rows.iter().chain(std::iter::once(&total)) {
        csv.push_str(&csv_field(&r.feature));
        for v in &r.values {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    out.csv("comparison.csv", &csv)?;
    out.json("comparison.json", &Comparison { scorecards: labels, rows, total, thresholds })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct GridFile {
    folds: usize,
    points: usize,
    results: Vec<ordscore_core::data::GridResult>,
}

/// Cross-validated hyperparameter sweep of the relaxation.
pub fn grid(run: &Loaded, out: &mut OutDir) -> Result<()> {
    let Some(g) = &run.config.grid else {
        return config("grid needs a [grid] section");
    };
    let (d, _) = run.dataset("data.train", run.config.data.train.as_ref())?;
    let folds = kfold(&d, g.folds, run.config.seed)?;
    let grid = g.grid();
    // Boundary weights are overwritten per grid point; the loss here only seeds the defaults.
    let cso = g.cso.params(d.num_categories, &ordscore_core::LossParams::symmetric(), None)?;
    let init = g.cso.init(d.dim(), d.num_categories)?;
    let target = g.target.unwrap_or_else(ordscore_core::LossParams::symmetric);
    let results = grid_search(&folds, &grid, &cso, &init, &target)?;

    let mut csv = String::from("rank,alpha_under,alpha_over,lambda1,validation_risk");
    for n in &d.feature_names {
        csv.push(',');
        csv.push_str(&csv_field(n));
    }
    for k in 0..d.num_categories - 1 {
        csv.push_str(&format!(",tau{}", k + 1));
    }
    csv.push('\n');
    for r in &results {
        csv.push_str(&format!("{},{},{},{},{}", r.rank, r.alpha_under, r.alpha_over, r.lambda1, r.validation_risk));
        for v in r.scorecard.beta.iter().chain(&r.scorecard.tau) {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    out.csv("grid.csv", &csv)?;
    if let Some(best) = results.iter().find(|r| r.rank == 1) {
        out.json("best_scorecard.json", &ScorecardFile::new(&best.scorecard, d.feature_names.clone(), run.digest.clone()))?;
    }
    out.json("grid.json", &GridFile { folds: g.folds, points: grid.points().len(), results })
}

pub fn run(command: &str, run: &Loaded, out_root: &Path) -> Result<()> {
    let mut out = OutDir::create(out_root.to_path_buf(), &run.digest)?;
    match command {
        "simulate" => simulate(run, &mut out),
        "partition" => partition(run, &mut out),
        "fit" => fit(run, &mut out),
        "evaluate" => evaluate(run, &mut out),
        "report" => report(run, &mut out),
        "grid" => grid(run, &mut out),
        other => config(format!("unknown command {other}")),
    }
}

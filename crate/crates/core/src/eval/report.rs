use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{auprc, auroc, binary_labels, high_risk_pr, ks_two_sample, tight_loose_accuracy, CurvePoint};
use crate::dataset::{Dataset, FeasibleSet};
use crate::error::{input, Result};
use crate::scorecard::Scorecard;

/// The eight headline metrics; `None` marks an undefined value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tight_accuracy: f64,
    pub loose_accuracy: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub high_risk_precision: Option<f64>,
    pub high_risk_recall: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
}

impl MetricsReport {
    pub fn fields(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("tight_accuracy", Some(self.tight_accuracy)),
            ("loose_accuracy", Some(self.loose_accuracy)),
            ("auroc", self.auroc),
            ("auprc", self.auprc),
            ("high_risk_precision", self.high_risk_precision),
            ("high_risk_recall", self.high_risk_recall),
            ("ks_statistic", self.ks_statistic),
            ("ks_p_value", self.ks_p_value),
        ]
    }

    /// `metric,value` rows; undefined values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.fields() {
            let _ = writeln!(out, "{name},{}", v.map(|x| x.to_string()).unwrap_or_default());
        }
        out
    }
}

/// All headline metrics of `card` on a two-class labelled dataset. The KS
/// statistic compares the score distributions of the two classes.
pub fn metrics_report(card: &Scorecard, d: &Dataset) -> Result<MetricsReport> {
    let (tight_accuracy, loose_accuracy) = tight_loose_accuracy(card, d)?;
    let (high_risk_precision, high_risk_recall) = high_risk_pr(card, d)?;
    let (scores, labels) = binary_labels(card, d)?;
    let (high, low): (Vec<(f64, bool)>, Vec<(f64, bool)>) = scores.iter().copied().zip(labels.iter().copied()).partition(|p| p.1);
    let ks = if high.is_empty() || low.is_empty() {
        None
    } else {
        let a: Vec<f64> = low.iter().map(|p| p.0).collect();
        let b: Vec<f64> = high.iter().map(|p| p.0).collect();
        Some(ks_two_sample(&a, &b)?)
    };
    Ok(MetricsReport {
        tight_accuracy,
        loose_accuracy,
        auroc: auroc(&scores, &labels)?,
        auprc: auprc(&scores, &labels)?,
        high_risk_precision,
        high_risk_recall,
        ks_statistic: ks.map(|k| k.statistic),
        ks_p_value: ks.map(|k| k.p_value),
    })
}

/// Writes curve points as CSV, highest cutoff first.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["threshold", "true_positives", "false_positives", "fpr", "recall", "precision"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        wtr.write_record([
            p.threshold.to_string(),
            p.true_positives.to_string(),
            p.false_positives.to_string(),
            opt(p.fpr),
            opt(p.recall),
            p.precision.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorizationRow {
    pub cohort: String,
    /// `counts[k-1]`: instances placed in category `k`.
    pub counts: Vec<usize>,
    pub total: usize,
    pub percentages: Vec<f64>,
}

/// Predicted-category counts per cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorizationTable {
    pub num_categories: usize,
    pub rows: Vec<CategorizationRow>,
}

impl CategorizationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cohort");
        for k in 1..=self.num_categories {
            let _ = write!(out, ",count_{k}");
        }
        for k in 1..=self.num_categories {
            let _ = write!(out, ",percent_{k}");
        }
        out.push_str(",total\n");
        for r in &self.rows {
            out.push_str(&r.cohort);
            for c in &r.counts {
                let _ = write!(out, ",{c}");
            }
            for p in &r.percentages {
                let _ = write!(out, ",{p:.1}");
            }
            let _ = writeln!(out, ",{}", r.total);
        }
        out
    }
}

/// Instances labelled lowest, labelled highest, and everything.
pub fn standard_cohorts(d: &Dataset) -> Vec<(String, Dataset)> {
    let k = d.num_categories;
    let pick = |set: FeasibleSet| -> Dataset {
        let idx: Vec<usize> = (0..d.len()).filter(|&i| d.instances[i].feasible == set).collect();
        d.subset(&idx)
    };
    vec![
        ("low".to_string(), pick(FeasibleSet::singleton(1))),
        ("high".to_string(), pick(FeasibleSet::singleton(k))),
        ("all".to_string(), d.clone()),
    ]
}

pub fn categorization_table(card: &Scorecard, cohorts: &[(String, Dataset)]) -> Result<CategorizationTable> {
    let k = card.num_categories();
    let mut rows = Vec::with_capacity(cohorts.len());
    for (name, d) in cohorts {
        let mut counts = vec![0usize; k];
        for c in card.categories(d)? {
            counts[c - 1] += 1;
        }
        let total = d.len();
        let percentages =
            counts.iter().map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 }).collect();
        rows.push(CategorizationRow { cohort: name.clone(), counts, total, percentages });
    }
    Ok(CategorizationTable { num_categories: k, rows })
}

/// Fixed-width histogram starting at `lower`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lower: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Unit-width bins centred on the integers spanning the data.
    pub fn integer_bins(values: &[f64]) -> Histogram {
        if values.is_empty() {
            return Histogram { lower: -0.5, width: 1.0, counts: Vec::new() };
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min).round();
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max).round();
        let bins = (hi - lo) as usize + 1;
        let mut h = Histogram { lower: lo - 0.5, width: 1.0, counts: vec![0; bins] };
        for &v in values {
            let b = ((v - h.lower) / h.width).floor() as usize;
            h.counts[b.min(bins - 1)] += 1;
        }
        h
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|b| self.lower + (b as f64 + 0.5) * self.width)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,count\n");
        for (c, n) in self.centers().zip(&self.counts) {
            let _ = writeln!(out, "{c},{n}");
        }
        out
    }

    /// Bar chart as a standalone SVG document.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, pad) = (640.0, 360.0, 40.0);
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bar = if self.counts.is_empty() { 0.0 } else { (w - 2.0 * pad) / self.counts.len() as f64 };
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
        let _ = writeln!(out, r#"<text x="{pad}" y="24" font-size="14">{}</text>"#, escape(title));
        let _ = writeln!(
            out,
            r#"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = h - pad,
            x2 = w - pad
        );
        for (b, (&n, c)) in self.counts.iter().zip(self.centers()).enumerate() {
            let bh = (h - 2.0 * pad - 20.0) * n as f64 / max;
            let x = pad + b as f64 * bar;
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="#4a78b0"><title>{c}: {n}</title></rect>"##,
                h - pad - bh,
                (bar - 1.0).max(0.5)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Per-instance `score_a - score_b` with summary moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialSummary {
    pub diffs: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Population skewness; `None` when every difference is equal.
    pub skewness: Option<f64>,
    pub histogram: Histogram,
}

pub fn score_differentials(a: &Scorecard, b: &Scorecard, d: &Dataset) -> Result<DifferentialSummary> {
    if a.dim() != b.dim() || a.dim() != d.dim() {
        return input(format!("dimensions differ: {} / {} / {}", a.dim(), b.dim(), d.dim()));
    }
    if d.is_empty() {
        return input("score differentials of an empty dataset");
    }
    let diffs: Vec<f64> =
        d.instances.iter().map(|i| Ok(a.score(&i.features)? - b.score(&i.features)?)).collect::<Result<_>>()?;
    let n = diffs.len() as f64;
    let mean = crate::numeric::stable_sum(diffs.iter().copied()) / n;
    let m2 = crate::numeric::stable_sum(diffs.iter().map(|v| (v - mean).powi(2))) / n;
    let m3 = crate::numeric::stable_sum(diffs.iter().map(|v| (v - mean).powi(3))) / n;
    let skewness = (m2 > 1e-300).then(|| m3 / m2.powf(1.5));
    let histogram = Histogram::integer_bins(&diffs);
    Ok(DifferentialSummary { diffs, mean, std_dev: m2.sqrt(), skewness, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;

    fn data() -> Dataset {
        let rows = [(vec![0.0, 1.0], 1), (vec![1.0, 1.0], 1), (vec![2.0, 0.0], 3), (vec![3.0, 1.0], 3), (vec![1.0, 0.0], 1)];
        Dataset::unnamed(rows.iter().map(|(x, k)| Instance::labeled(x.clone(), *k)).collect(), 2, 3).unwrap()
    }

    #[test]
    fn differentials_follow_linearity() {
        let d = data();
        let a = Scorecard::new(vec![1.0, 2.0], vec![1.5, 2.5]).unwrap();
        let same = score_differentials(&a, &a, &d).unwrap();
        assert!(same.diffs.iter().all(|&v| v == 0.0));
        assert_eq!(same.skewness, None);
        let b = Scorecard::new(vec![2.0, 2.0], vec![1.5, 2.5]).unwrap();
        let s = score_differentials(&b, &a, &d).unwrap();
        let col: Vec<f64> = d.instances.iter().map(|i| i.features[0]).collect();
        assert_eq!(s.diffs, col);
        assert!((s.mean - 7.0 / 5.0).abs() < 1e-15);
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 5);
    }

    #[test]
    fn table_rows_sum() {
        let d = data();
        let card = Scorecard::new(vec![1.0, 0.0], vec![0.5, 1.5]).unwrap();
        let t = categorization_table(&card, &standard_cohorts(&d)).unwrap();
        assert_eq!(t.rows.len(), 3);
        for r in &t.rows {
            assert_eq!(r.counts.iter().sum::<usize>(), r.total);
            assert!((r.percentages.iter().sum::<f64>() - 100.0).abs() < 0.1);
        }
        assert_eq!(t.rows[1].counts, vec![0, 0, 2]);
        let single = vec![("one".to_string(), d.subset(&[0]))];
        assert_eq!(categorization_table(&card, &single).unwrap().rows[0].percentages, vec![100.0, 0.0, 0.0]);
        assert!(t.to_csv().starts_with("cohort,count_1,count_2,count_3,percent_1"));
    }

    #[test]
    fn report_lists_eight_fields() {
        let d = data();
        let card = Scorecard::new(vec![1.0, 0.0], vec![0.5, 1.5]).unwrap();
        let r = metrics_report(&card, &d).unwrap();
        assert_eq!(r.fields().len(), 8);
        assert_eq!(r.to_csv().lines().count(), 9);
        assert!(r.tight_accuracy <= r.loose_accuracy);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json.as_object().unwrap().len(), 8);
    }

    #[test]
    fn svg_has_one_bar_per_bin() {
        let h = Histogram::integer_bins(&[0.0, 1.0, 1.0, 3.0]);
        assert_eq!(h.counts, vec![1, 2, 0, 1]);
        let svg = h.to_svg("diff <a&b>");
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("&lt;a&amp;b&gt;"));
    }
}

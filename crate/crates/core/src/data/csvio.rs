use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::EncounterRecord;
use crate::dataset::{Dataset, FeasibleSet, Instance};
use crate::error::{Error, Result};

/// Which optional columns a file must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// `id`, `f:<name>`..., `feasible`, optional `weight`.
    Dataset,
    /// `id`, `f:<name>`..., `fell`, `targeted`, optional `weight`.
    Encounters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: String,
    pub features: Vec<f64>,
    pub feasible: Option<FeasibleSet>,
    pub weight: f64,
    pub fell: Option<bool>,
    pub targeted: Option<bool>,
}

/// In-memory form of the CSV interchange format.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    /// Rows get ids `0..n` unless `ids` is given.
    pub fn from_dataset(d: &Dataset, ids: Option<&[String]>) -> Table {
        let rows = d
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| Row {
                id: ids.map_or_else(|| i.to_string(), |ids| ids[i].clone()),
                features: inst.features.clone(),
                feasible: Some(inst.feasible),
                weight: inst.weight,
                fell: None,
                targeted: None,
            })
            .collect();
        Table { feature_names: d.feature_names.clone(), rows }
    }

    pub fn from_records(records: &[EncounterRecord], feature_names: &[String]) -> Table {
        let rows = records
            .iter()
            .map(|r| Row {
                id: r.id.clone(),
                features: r.features.clone(),
                feasible: None,
                weight: r.weight,
                fell: Some(r.fell),
                targeted: Some(r.targeted_intervention),
            })
            .collect();
        Table { feature_names: feature_names.to_vec(), rows }
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.clone()).collect()
    }

    pub fn to_dataset(&self, num_categories: usize) -> Result<Dataset> {
        let mut instances = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let set = r.feasible.ok_or_else(|| Error::Schema(format!("row {} has no feasible set", r.id)))?;
            instances.push(Instance::new(r.features.clone(), set, r.weight)?);
        }
        Dataset::new(instances, self.feature_names.clone(), num_categories, Vec::new())
    }

    pub fn to_records(&self) -> Result<Vec<EncounterRecord>> {
        self.rows
            .iter()
            .map(|r| match (r.fell, r.targeted) {
                (Some(fell), Some(targeted)) => Ok(EncounterRecord {
                    id: r.id.clone(),
                    features: r.features.clone(),
                    fell,
                    targeted_intervention: targeted,
                    weight: r.weight,
                }),
                _ => Err(Error::Schema(format!("row {} lacks fell/targeted", r.id))),
            })
            .collect()
    }
}

pub fn load_csv(path: &Path, schema: Schema) -> Result<Table> {
    read_csv(File::open(path)?, schema)
}

pub fn save_csv(table: &Table, schema: Schema, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    write_csv(table, schema, &mut f)?;
    f.flush()?;
    Ok(())
}

struct Columns {
    id: usize,
    features: Vec<usize>,
    feasible: Option<usize>,
    weight: Option<usize>,
    fell: Option<usize>,
    targeted: Option<usize>,
}

fn columns(header: &csv::StringRecord, schema: Schema) -> Result<(Columns, Vec<String>)> {
    let mut id = None;
    let mut features = Vec::new();
    let mut names = Vec::new();
    let (mut feasible, mut weight, mut fell, mut targeted) = (None, None, None, None);
    for (c, name) in header.iter().enumerate() {
        let slot = match name {
            "id" => &mut id,
            "feasible" => &mut feasible,
            "weight" => &mut weight,
            "fell" => &mut fell,
            "targeted" => &mut targeted,
            other => match other.strip_prefix("f:") {
                Some(feature) if !feature.is_empty() => {
                    if names.iter().any(|n| n == feature) {
                        return Err(Error::Schema(format!("duplicate feature column {other:?}")));
                    }
                    features.push(c);
                    names.push(feature.to_string());
                    continue;
                }
                _ => return Err(Error::Schema(format!("unexpected column {other:?}"))),
            },
        };
        if slot.replace(c).is_some() {
            return Err(Error::Schema(format!("duplicate column {name:?}")));
        }
    }
    let missing = |what: &str| Error::Schema(format!("missing column {what:?}"));
    let id = id.ok_or_else(|| missing("id"))?;
    match schema {
        Schema::Dataset => {
            feasible.ok_or_else(|| missing("feasible"))?;
        }
        Schema::Encounters => {
            fell.ok_or_else(|| missing("fell"))?;
            targeted.ok_or_else(|| missing("targeted"))?;
        }
    }
    Ok((Columns { id, features, feasible, weight, fell, targeted }, names))
}

fn parse_flag(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(format!("expected 0 or 1, found {other:?}")),
    }
}

pub fn read_csv<R: Read>(r: R, schema: Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(r);
    let header = rdr.headers()?.clone();
    let (cols, feature_names) = columns(&header, schema)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        let field = |c: usize| rec.get(c).unwrap_or("");
        let mut features = Vec::with_capacity(cols.features.len());
        for (&c, name) in cols.features.iter().zip(&feature_names) {
            let v: f64 = field(c).trim().parse().map_err(|_| bad(format!("feature {name}: {:?} is not a number", field(c))))?;
            if !v.is_finite() {
                return Err(bad(format!("feature {name} is not finite")));
            }
            features.push(v);
        }
        let feasible = match cols.feasible {
            Some(c) => Some(field(c).trim().parse::<FeasibleSet>().map_err(|e| bad(format!("feasible: {e}")))?),
            None => None,
        };
        let weight = match cols.weight.map(field).map(str::trim) {
            None | Some("") => 1.0,
            Some(s) => s.parse::<f64>().map_err(|_| bad(format!("weight {s:?} is not a number")))?,
        };
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(bad(format!("weight {weight} must be positive")));
        }
        let flag = |c: Option<usize>, what: &str| -> Result<Option<bool>> {
            c.map(|c| parse_flag(field(c)).map_err(|m| bad(format!("{what}: {m}")))).transpose()
        };
        rows.push(Row {
            id: field(cols.id).to_string(),
            features,
            feasible,
            weight,
            fell: flag(cols.fell, "fell")?,
            targeted: flag(cols.targeted, "targeted")?,
        });
    }
    Ok(Table { feature_names, rows })
}

/// Writes `id`, the feature columns, the schema's label columns, and `weight`.
pub fn write_csv<W: Write>(table: &Table, schema: Schema, w: W) -> Result<()> {
    let mut header = vec!["id".to_string()];
    header.extend(table.feature_names.iter().map(|n| format!("f:{n}")));
    match schema {
        Schema::Dataset => header.push("feasible".into()),
        Schema::Encounters => header.extend(["fell".to_string(), "targeted".to_string()]),
    }
    header.push("weight".into());
    let flag = |v: Option<bool>, r: &Row, what: &str| match v {
        Some(b) => Ok(if b { "1" } else { "0" }.to_string()),
        None => Err(Error::Schema(format!("row {} has no {what} value", r.id))),
    };
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![r.id.clone()];
        rec.extend(r.features.iter().map(|v| v.to_string()));
        match schema {
            Schema::Dataset => match r.feasible {
                Some(s) => rec.push(s.to_string()),
                None => return Err(Error::Schema(format!("row {} has no feasible set", r.id))),
            },
            Schema::Encounters => {
                rec.push(flag(r.fell, r, "fell")?);
                rec.push(flag(r.targeted, r, "targeted")?);
            }
        }
        rec.push(r.weight.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

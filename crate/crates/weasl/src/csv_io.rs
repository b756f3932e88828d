//! Dataset CSV format.
//!
//! One row per instance with a mandatory header. Feature columns are named
//! `f0..f{d-1}`; the optional columns `y`, `group_id` and `g` carry the true
//! label, group id and group label. A missing value is an empty cell. Labels
//! are written as `0`/`1` and floats in shortest round-trip form, so
//! `read(write(ds))` reproduces every field bit for bit.
//!
//! Lines starting with `#` before the header are ignored, which lets result
//! files carry a reproducibility header.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use weasl_core::data::{Dataset, GroupTable, Instance};

use crate::error::{Error, Result};

/// Which header names hold which field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub features: Vec<String>,
    pub label: Option<String>,
    pub group_id: Option<String>,
    pub group_label: Option<String>,
}

impl CsvSchema {
    /// The standard names for a `dim`-feature file.
    pub fn standard(dim: usize, label: bool, groups: bool) -> Self {
        CsvSchema {
            features: (0..dim).map(|i| format!("f{i}")).collect(),
            label: label.then(|| "y".to_string()),
            group_id: groups.then(|| "group_id".to_string()),
            group_label: groups.then(|| "g".to_string()),
        }
    }

    /// Infers the standard schema from a header; unknown columns are errors.
    pub fn from_header(header: &[&str]) -> Result<Self> {
        let mut feature_idx = Vec::new();
        let mut schema = CsvSchema {
            features: Vec::new(),
            label: None,
            group_id: None,
            group_label: None,
        };
        for &name in header {
            match name {
                "y" => schema.label = Some(name.to_string()),
                "group_id" => schema.group_id = Some(name.to_string()),
                "g" => schema.group_label = Some(name.to_string()),
                _ => match name.strip_prefix('f').and_then(|n| n.parse::<usize>().ok()) {
                    Some(i) if format!("f{i}") == name => feature_idx.push(i),
                    _ => return Err(Error::Format(format!("unknown column `{name}`"))),
                },
            }
        }
        feature_idx.sort_unstable();
        if feature_idx.iter().enumerate().any(|(k, &i)| k != i) {
            return Err(Error::Format("feature columns must be f0..f{d-1} without gaps".into()));
        }
        schema.features = feature_idx.iter().map(|i| format!("f{i}")).collect();
        Ok(schema)
    }
}

struct Columns {
    features: Vec<usize>,
    label: Option<usize>,
    group_id: Option<usize>,
    group_label: Option<usize>,
}

fn locate(header: &csv::StringRecord, schema: &CsvSchema) -> Result<Columns> {
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))
    };
    if schema.features.is_empty() {
        return Err(Error::Format("no feature columns".into()));
    }
    Ok(Columns {
        features: schema.features.iter().map(|n| find(n)).collect::<Result<_>>()?,
        label: schema.label.as_deref().map(find).transpose()?,
        group_id: schema.group_id.as_deref().map(find).transpose()?,
        group_label: schema.group_label.as_deref().map(find).transpose()?,
    })
}

fn parse_bit(cell: &str, what: &str, row: u64) -> Result<Option<bool>> {
    match cell.trim() {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::Parse {
            row,
            message: format!("{what} must be 0, 1 or empty, got `{other}`"),
        }),
    }
}

/// Reads a dataset; with `schema = None` the standard names are inferred from
/// the header. The group table is built when group columns are present.
pub fn read_csv<R: Read>(reader: R, schema: Option<&CsvSchema>) -> Result<(Dataset, Option<GroupTable>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let inferred;
    let schema = match schema {
        Some(s) => s,
        None => {
            inferred = CsvSchema::from_header(&header.iter().collect::<Vec<_>>())?;
            &inferred
        }
    };
    let cols = locate(&header, schema)?;

    let mut instances = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k as u64 + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
                row,
                message: format!("expected {expected_len} fields, found {len}"),
            },
            _ => Error::Csv(e),
        })?;
        let features = cols
            .features
            .iter()
            .map(|&c| {
                let cell = record[c].trim();
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("feature `{}` is not a finite number: `{cell}`", &header[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut inst = Instance::new(features);
        inst.true_label = cols.label.map(|c| parse_bit(&record[c], "y", row)).transpose()?.flatten();
        inst.group_id = cols
            .group_id
            .map(|c| match record[c].trim() {
                "" => Ok(None),
                cell => cell.parse::<u64>().map(Some).map_err(|_| Error::Parse {
                    row,
                    message: format!("group_id must be a non-negative integer, got `{cell}`"),
                }),
            })
            .transpose()?
            .flatten();
        inst.group_label = cols.group_label.map(|c| parse_bit(&record[c], "g", row)).transpose()?.flatten();
        if inst.group_label.is_some() && inst.group_id.is_none() {
            return Err(Error::Parse {
                row,
                message: "g is set but group_id is empty".into(),
            });
        }
        instances.push(inst);
    }
    let ds = Dataset::new(schema.features.len(), instances)?;
    let groups = if cols.group_id.is_some() && ds.has_groups() {
        Some(GroupTable::from_dataset(&ds).map_err(|e| Error::Consistency(e.to_string()))?)
    } else {
        None
    };
    Ok((ds, groups))
}

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&CsvSchema>) -> Result<(Dataset, Option<GroupTable>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    read_csv(file, schema)
}

/// Writes the standard layout. `y` is included when any instance has a true
/// label and the group columns when any instance has a group id.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let has_y = ds.iter().any(|i| i.true_label.is_some());
    let has_groups = ds.iter().any(|i| i.group_id.is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let schema = CsvSchema::standard(ds.dim(), has_y, has_groups);
    let mut header = schema.features.clone();
    header.extend(schema.label);
    header.extend(schema.group_id);
    header.extend(schema.group_label);
    w.write_record(&header)?;
    let bit = |b: Option<bool>| b.map_or(String::new(), |v| u8::from(v).to_string());
    for inst in ds.iter() {
        let mut row: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
        if has_y {
            row.push(bit(inst.true_label));
        }
        if has_groups {
            row.push(inst.group_id.map_or(String::new(), |g| g.to_string()));
            row.push(bit(inst.group_label));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::io("<csv writer>"))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    let mut out = BufWriter::new(file);
    write_csv(ds, &mut out)?;
    out.flush().map_err(Error::io(path))
}

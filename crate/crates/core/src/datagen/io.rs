//! Dataset CSV plus JSON sidecar carrying ground truth and provenance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    CohortMatrix, Family, GroundTruth, LabeledDataset, Provenance, Role, SynthConfig,
    SCHEMA_VERSION,
};
use crate::{Error, Matrix, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    preset: String,
    config: Option<SynthConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    families: Option<Vec<Family>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    affected: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    directions: Option<BTreeMap<String, BTreeMap<String, i8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    severity: Option<Vec<[f64; 3]>>,
}

/// `dir/name.csv` -> `dir/name.truth.json`
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    csv_path.with_file_name(format!("{stem}.truth.json"))
}

pub fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let mut header = vec!["participant_id".to_string(), "role".to_string()];
    header.extend(ds.data.variable_names().iter().cloned());
    w.write_record(&header)?;
    let values = ds.data.values();
    for (i, (id, role)) in ds.participant_ids.iter().zip(&ds.roles).enumerate() {
        let mut rec = vec![id.clone(), role.as_str().to_string()];
        rec.extend(values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let names = ds.data.variable_names();
    let mut sc = Sidecar {
        schema_version: ds.provenance.schema_version,
        preset: ds.provenance.preset.clone(),
        config: ds.provenance.config.clone(),
        note: ds.provenance.note.clone(),
        families: Some(ds.data.families().to_vec()),
        labels: None,
        affected: None,
        directions: None,
        severity: None,
    };
    if let Some(t) = &ds.truth {
        let mut affected = BTreeMap::new();
        let mut directions = BTreeMap::new();
        for (c, (set, signs)) in t.affected.iter().zip(&t.directions).enumerate() {
            let key = (c + 1).to_string();
            affected.insert(key.clone(), set.iter().map(|&j| names[j].clone()).collect());
            directions.insert(
                key,
                set.iter()
                    .zip(signs)
                    .map(|(&j, &s)| (names[j].clone(), s))
                    .collect(),
            );
        }
        sc.labels = Some(t.labels.clone());
        sc.affected = Some(affected);
        sc.directions = Some(directions);
        sc.severity = Some(t.severity.clone());
    }
    let side = sidecar_path(path);
    let f = File::create(&side).map_err(|e| Error::io(&side, e))?;
    let mut bw = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut bw, &sc)?;
    bw.write_all(b"\n").map_err(|e| Error::io(&side, e))?;
    bw.flush().map_err(|e| Error::io(&side, e))?;
    Ok(())
}

struct RawTable {
    header: Vec<String>,
    ids: Vec<String>,
    roles: Vec<Role>,
    values: Matrix,
}

fn read_dataset_csv(path: &Path) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header[0] != "participant_id" || header[1] != "role" {
        return Err(Error::malformed(
            path,
            "header must start with `participant_id,role` followed by variables",
        ));
    }
    let n_vars = header.len() - 2;
    let mut ids = Vec::new();
    let mut roles = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::malformed(
                path,
                format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    rec.len(),
                    header.len()
                ),
            ));
        }
        ids.push(rec[0].to_string());
        roles.push(match &rec[1] {
            "control" => Role::Control,
            "patient" => Role::Patient,
            other => {
                return Err(Error::malformed(
                    path,
                    format!("row {}: unknown role `{other}`", line + 1),
                ))
            }
        });
        for (j, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::malformed(path, format!("row {}: `{field}` is not a number", line + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::malformed(
                    path,
                    format!(
                        "row {}, variable `{}`: non-finite value",
                        line + 1,
                        header[j + 2]
                    ),
                ));
            }
            data.push(v);
        }
    }
    let values = Matrix::from_vec(ids.len(), n_vars, data)?;
    Ok(RawTable {
        header: header[2..].to_vec(),
        ids,
        roles,
        values,
    })
}

/// Load a dataset CSV and, if present, its ground-truth sidecar.
///
/// Without a sidecar the dataset is usable for fitting but carries no truth.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let raw = read_dataset_csv(path)?;
    let names = raw.header;
    let side = sidecar_path(path);
    if !side.exists() {
        let n = names.len();
        let data = CohortMatrix::new(names, raw.values, vec![Family::Generic; n])?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        return LabeledDataset::new(raw.ids, data, raw.roles, None, Provenance::external(stem));
    }
    let f = File::open(&side).map_err(|e| Error::io(&side, e))?;
    let sc: Sidecar = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::malformed(&side, e.to_string()))?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCHEMA_VERSION,
            found: sc.schema_version,
        });
    }
    let families = match sc.families {
        Some(f) if f.len() == names.len() => f,
        Some(_) => {
            return Err(Error::malformed(
                &side,
                "family list length differs from variables",
            ))
        }
        None => vec![Family::Generic; names.len()],
    };
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let truth = match (sc.labels, sc.affected, sc.directions, sc.severity) {
        (Some(labels), Some(affected), Some(directions), Some(severity)) => {
            let k = affected.len();
            let mut aff = Vec::with_capacity(k);
            let mut dirs = Vec::with_capacity(k);
            for c in 1..=k {
                let key = c.to_string();
                let vars = affected.get(&key).ok_or_else(|| {
                    Error::malformed(&side, format!("affected set for cluster {c} missing"))
                })?;
                let signs = directions.get(&key).ok_or_else(|| {
                    Error::malformed(&side, format!("directions for cluster {c} missing"))
                })?;
                if signs.len() != vars.len() {
                    return Err(Error::malformed(
                        &side,
                        format!("cluster {c}: directions differ from affected set"),
                    ));
                }
                let mut pairs = Vec::with_capacity(vars.len());
                for v in vars {
                    let j = *index.get(v.as_str()).ok_or_else(|| {
                        Error::malformed(&side, format!("unknown variable `{v}`"))
                    })?;
                    let s = *signs.get(v).ok_or_else(|| {
                        Error::malformed(&side, format!("no direction for `{v}`"))
                    })?;
                    pairs.push((j, s));
                }
                pairs.sort_unstable();
                aff.push(pairs.iter().map(|p| p.0).collect());
                dirs.push(pairs.iter().map(|p| p.1).collect());
            }
            Some(GroundTruth {
                labels,
                affected: aff,
                directions: dirs,
                severity,
            })
        }
        (None, None, None, None) => None,
        _ => return Err(Error::malformed(&side, "incomplete ground truth")),
    };
    let data = CohortMatrix::new(names, raw.values, families)?;
    LabeledDataset::new(
        raw.ids,
        data,
        raw.roles,
        truth,
        Provenance {
            preset: sc.preset,
            config: sc.config,
            schema_version: sc.schema_version,
            note: sc.note,
        },
    )
}

/// Reference cohort from a CSV: either the dataset format (control rows are
/// used) or a plain header-plus-numbers table.
pub(crate) fn load_reference_csv(path: &Path) -> Result<CohortMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().from_reader(BufReader::new(file));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    drop(r);
    if header.first().map(String::as_str) == Some("participant_id") {
        let ds = load_dataset(path)?;
        let controls = ds.controls();
        let (names, _, fams) = ds.data.into_parts();
        return CohortMatrix::new(names, controls, fams);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().from_reader(BufReader::new(file));
    let mut data = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        for f in rec.iter() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::malformed(path, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::malformed(path, "non-finite value"));
            }
            data.push(v);
        }
        n += 1;
    }
    let values = Matrix::from_vec(n, header.len(), data)
        .map_err(|_| Error::malformed(path, "ragged rows"))?;
    let fams = vec![Family::Generic; header.len()];
    CohortMatrix::new(header, values, fams)
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Algorithm, BenchmarkRecord, RecordStatus};
use crate::{Error, Result};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 10] = [
    "algorithm",
    "preset",
    "variant",
    "k",
    "seed",
    "accuracy",
    "pattern_score",
    "wall_ms",
    "peak_mem_bytes",
    "status",
];

#[derive(Serialize, Deserialize)]
struct CsvRow {
    algorithm: Algorithm,
    preset: String,
    variant: String,
    k: usize,
    seed: u64,
    accuracy: Option<f64>,
    pattern_score: Option<f64>,
    wall_ms: Option<f64>,
    peak_mem_bytes: Option<u64>,
    status: RecordStatus,
}

#[derive(Serialize, Deserialize)]
struct JsonLine {
    schema_version: u32,
    #[serde(flatten)]
    record: BenchmarkRecord,
}

/// One radar chart: accuracy per surviving axis for a single algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarReport {
    pub algorithm: Algorithm,
    pub axes: Vec<String>,
    pub values: Vec<f64>,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub radars: Vec<RadarReport>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_csv(records: &[BenchmarkRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in records {
        w.serialize(CsvRow {
            algorithm: r.algorithm,
            preset: r.preset.clone(),
            variant: r.variant.clone(),
            k: r.k,
            seed: r.seed,
            accuracy: r.accuracy,
            pattern_score: r.pattern_score,
            wall_ms: r.wall_ms,
            peak_mem_bytes: r.peak_mem_bytes,
            status: r.status,
        })?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parse a results CSV. Messages are not stored in the CSV and come back empty.
pub fn read_csv(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Malformed {
            path: path.into(),
            msg: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(BenchmarkRecord {
                algorithm: row.algorithm,
                preset: row.preset,
                variant: row.variant,
                k: row.k,
                seed: row.seed,
                accuracy: row.accuracy,
                pattern_score: row.pattern_score,
                wall_ms: row.wall_ms,
                peak_mem_bytes: row.peak_mem_bytes,
                status: row.status,
                message: None,
            })
        })
        .collect()
}

pub fn write_jsonl(records: &[BenchmarkRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        let line = JsonLine {
            schema_version: RESULTS_SCHEMA_VERSION,
            record: r.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<BenchmarkRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.into(),
            msg: format!("line {}: {e}", i + 1),
        })?;
        if parsed.schema_version != RESULTS_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: RESULTS_SCHEMA_VERSION,
                found: parsed.schema_version,
            });
        }
        out.push(parsed.record);
    }
    Ok(out)
}

/// Mean accuracy per axis for one algorithm. An axis with any failed or
/// timed-out cell is dropped entirely.
pub fn radar_axes(records: &[BenchmarkRecord], alg: Algorithm) -> (Vec<String>, Vec<f64>) {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, Option<Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.algorithm == alg) {
        let axis = r.axis();
        if !acc.contains_key(&axis) {
            order.push(axis.clone());
            acc.insert(axis.clone(), Some(Vec::new()));
        }
        let slot = acc.get_mut(&axis).expect("inserted above");
        match (r.status, r.accuracy, slot.as_mut()) {
            (RecordStatus::Ok, Some(a), Some(v)) => v.push(a),
            _ => *slot = None,
        }
    }
    let mut axes = Vec::new();
    let mut values = Vec::new();
    for axis in order {
        if let Some(v) = &acc[&axis] {
            axes.push(axis);
            values.push(v.iter().sum::<f64>() / v.len() as f64);
        }
    }
    (axes, values)
}

const SIZE: f64 = 600.0;
const CENTER: f64 = 300.0;
const RADIUS: f64 = 200.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn polar(i: usize, n: usize, r: f64) -> (f64, f64) {
    let theta = std::f64::consts::TAU * i as f64 / n as f64 - std::f64::consts::FRAC_PI_2;
    (CENTER + r * theta.cos(), CENTER + r * theta.sin())
}

/// Radar chart with radius equal to raw accuracy.
pub fn radar_svg(alg: Algorithm, axes: &[String], values: &[f64]) -> String {
    let n = axes.len();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{CENTER}" y="24" text-anchor="middle" font-size="16">{} accuracy</text>"#,
        alg.as_str()
    );
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..n.max(1))
            .map(|i| {
                let (x, y) = polar(i, n.max(1), ring * RADIUS);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        if n >= 3 {
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="none" stroke="#ccc"/>"##,
                pts.join(" ")
            );
        } else {
            let _ = writeln!(
                s,
                r##"<circle cx="{CENTER}" cy="{CENTER}" r="{:.2}" fill="none" stroke="#ccc"/>"##,
                ring * RADIUS
            );
        }
    }
    for (i, axis) in axes.iter().enumerate() {
        let (x, y) = polar(i, n, RADIUS);
        let (lx, ly) = polar(i, n, RADIUS + 28.0);
        let _ = writeln!(
            s,
            r##"<line x1="{CENTER}" y1="{CENTER}" x2="{x:.2}" y2="{y:.2}" stroke="#999"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text class="axis" x="{lx:.2}" y="{ly:.2}" text-anchor="middle">{}</text>"#,
            xml_escape(axis)
        );
    }
    if n > 0 {
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (x, y) = polar(i, n, v.clamp(0.0, 1.0) * RADIUS);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="series" data-algorithm="{}" points="{}" fill="#3b7dd8" fill-opacity="0.3" stroke="#3b7dd8" stroke-width="2"/>"##,
            alg.as_str(),
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write `results.csv`, `results.jsonl` and `radar_<algorithm>.svg` files.
/// Algorithms with no surviving axis get no chart.
pub fn emit_report(records: &[BenchmarkRecord], out_dir: &Path) -> Result<ReportFiles> {
    if records.is_empty() {
        return Err(Error::Input("no records to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv = out_dir.join("results.csv");
    let jsonl = out_dir.join("results.jsonl");
    write_csv(records, &csv)?;
    write_jsonl(records, &jsonl)?;
    let mut algs: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
    algs.sort();
    algs.dedup();
    let mut radars = Vec::new();
    for alg in algs {
        let (axes, values) = radar_axes(records, alg);
        if axes.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("radar_{}.svg", alg.as_str()));
        fs::write(&path, radar_svg(alg, &axes, &values)).map_err(|e| Error::io(&path, e))?;
        radars.push(RadarReport {
            algorithm: alg,
            axes,
            values,
            path,
        });
    }
    Ok(ReportFiles { csv, jsonl, radars })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alg: Algorithm, variant: &str, seed: u64, status: RecordStatus) -> BenchmarkRecord {
        BenchmarkRecord {
            algorithm: alg,
            preset: "syn3".into(),
            variant: variant.into(),
            k: 2,
            seed,
            accuracy: (status == RecordStatus::Ok).then_some(0.1 * seed as f64 + 0.3),
            pattern_score: Some(-0.25),
            wall_ms: Some(12.5),
            peak_mem_bytes: Some(1 << 20),
            status,
            message: None,
        }
    }

    fn axis_count(svg: &str) -> usize {
        svg.matches(r#"class="axis""#).count()
    }

    #[test]
    fn three_records_one_chart_three_axes() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = ["widespread-equal", "noise-equal", "subtle-equal"]
            .iter()
            .map(|v| rec(Algorithm::Hydra, v, 1, RecordStatus::Ok))
            .collect();
        let files = emit_report(&recs, dir.path()).unwrap();
        assert_eq!(files.radars.len(), 1);
        let svg = fs::read_to_string(&files.radars[0].path).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 600 600""#));
        assert_eq!(axis_count(&svg), 3);
        assert!(svg.contains("syn3/noise-equal/K2"));
    }

    #[test]
    fn failed_axis_is_omitted() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            rec(Algorithm::Sustain, "widespread-equal", 1, RecordStatus::Ok),
            rec(Algorithm::Sustain, "noise-equal", 1, RecordStatus::Ok),
            rec(Algorithm::Sustain, "noise-equal", 2, RecordStatus::Failed),
            rec(Algorithm::Sustain, "subtle-equal", 1, RecordStatus::Timeout),
        ];
        let files = emit_report(&recs, dir.path()).unwrap();
        let svg = fs::read_to_string(&files.radars[0].path).unwrap();
        assert_eq!(axis_count(&svg), 1);
        assert!(!svg.contains("noise-equal"));
        assert_eq!(files.radars[0].axes, vec!["syn3/widespread-equal/K2"]);
    }

    #[test]
    fn all_failed_writes_no_chart() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![rec(
            Algorithm::Hydra,
            "noise-equal",
            1,
            RecordStatus::Failed,
        )];
        assert!(emit_report(&recs, dir.path()).unwrap().radars.is_empty());
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = vec![
            rec(Algorithm::Smilegan, "widespread-equal", 3, RecordStatus::Ok),
            rec(Algorithm::Hydra, "noise-unequal", 2, RecordStatus::Timeout),
        ];
        recs[0].accuracy = Some(1.0 / 3.0);
        // shortest-repr decimal that a lossy parser reads back one ulp high
        recs[0].pattern_score = Some(71.0 / 75.0);
        recs[1].wall_ms = None;
        recs[1].message = Some("budget, with \"quotes\"".into());
        let files = emit_report(&recs, dir.path()).unwrap();
        let text = fs::read_to_string(&files.csv).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let back = read_csv(&files.csv).unwrap();
        let mut expect = recs.clone();
        expect[1].message = None;
        assert_eq!(back, expect);
        assert_eq!(read_jsonl(&files.jsonl).unwrap(), recs);
    }

    #[test]
    fn jsonl_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        write_jsonl(&[rec(Algorithm::Hydra, "base", 1, RecordStatus::Ok)], &p).unwrap();
        let text = fs::read_to_string(&p)
            .unwrap()
            .replace("\"schema_version\":1", "\"schema_version\":7");
        fs::write(&p, text).unwrap();
        assert!(matches!(
            read_jsonl(&p),
            Err(Error::SchemaVersion { found: 7, .. })
        ));
    }

    #[test]
    fn empty_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], dir.path()).is_err());
    }
}

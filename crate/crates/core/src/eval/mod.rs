//! Scoring against planted truth, the benchmark grid and its reports.

mod grid;
pub(crate) mod kmeans;
mod matching;
mod report;
mod rindex;

pub use grid::{
    fit_algorithm, peak_rss_bytes, run_cell, run_grid, Algorithm, AlgorithmOutput, BenchmarkRecord,
    FittedModel, GridConfig, ModuleConfigs, RecordStatus,
};
pub use kmeans::{kmeans, KMeansResult};
pub use matching::{
    confusion, hungarian, matched_accuracy, max_weight_matching, pattern_score, MatchResult,
};
pub use report::{
    emit_report, radar_axes, radar_svg, read_csv, read_jsonl, write_csv, write_jsonl, RadarReport,
    ReportFiles, CSV_HEADER, RESULTS_SCHEMA_VERSION,
};
pub use rindex::{rindex_cluster_gap, rindex_individual_accuracy, RindexGap};

//! Run orchestration: single runs, parameter sweeps and their CSV output.
//!
//! The CSV schema is frozen: four identity columns, two sweep columns
//! (empty for single runs) and seven metric columns, in this order:
//!
//! ```text
//! router,audience_count,sim_duration_s,seed,axis,axis_value,
//! created,delivered_unique,relays,delivery_probability,overhead_ratio,
//! latency_avg,messages_per_destination
//! ```
//!
//! Absent metrics (overhead and latency of a run without deliveries) are
//! written as empty fields, never as 0.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{self, SimResult};
use crate::metrics::{self, Report};
use crate::scenario::{InvalidConfig, ScenarioConfig};
use crate::settings::{self, SettingsError};
use crate::trace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] SettingsError),
    #[error("sweep failed at {axis} = {value}: {reason}")]
    SweepRun {
        axis: String,
        value: String,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<InvalidConfig> for Error {
    fn from(e: InvalidConfig) -> Self {
        Error::Config(SettingsError::Invariant {
            key: e.key.to_string(),
            reason: e.reason.to_string(),
            line: None,
        })
    }
}

impl Error {
    /// Process exit code: 1 for configuration problems, 2 for runtime ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::SweepRun { .. } => 1,
            Error::Io { .. } => 2,
        }
    }
}

pub const CSV_HEADER: &str = "router,audience_count,sim_duration_s,seed,axis,axis_value,\
created,delivered_unique,relays,delivery_probability,overhead_ratio,latency_avg,\
messages_per_destination";

/// One finished run with everything the CLI persists.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub report: Report,
    pub csv_row: String,
    pub trace: String,
    pub warnings: Vec<String>,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the frozen CSV row for one run.
pub fn csv_row(config: &ScenarioConfig, axis: Option<(&str, &str)>, report: &Report) -> String {
    let (axis_name, axis_value) = axis.unwrap_or(("", ""));
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        config.router_kind,
        config.audience_count,
        config.sim_duration,
        config.rng_seed,
        axis_name,
        axis_value,
        report.created,
        report.delivered_unique,
        report.relays,
        report.delivery_probability,
        opt_f64(report.overhead_ratio),
        opt_f64(report.latency_avg),
        report.messages_per_destination,
    )
}

/// Executes one run and prepares its CSV row and event trace.
pub fn run_single(config: &ScenarioConfig) -> Result<RunOutput, Error> {
    let result: SimResult = engine::run(config)?;
    let report = metrics::report(&result.log, config.audience_count);
    let mut warnings = result.warnings;
    if report.degenerate {
        warnings.push("degenerate run: no message was ever created".to_string());
    }
    Ok(RunOutput {
        csv_row: csv_row(config, None, &report),
        trace: trace::write_trace(&result.log),
        config: config.clone(),
        report,
        warnings,
    })
}

/// A sweep over one configuration key.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub report: Report,
    pub csv_row: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// `CSV_HEADER` plus one line per (value, seed), ordered.
    pub csv: String,
    pub metadata_json: String,
}

#[derive(Serialize)]
struct SweepMetadata<'a> {
    tool_version: &'static str,
    axis: &'a str,
    values: &'a [String],
    seeds: &'a [u64],
    /// Contacts are sampled at t = 0 and then once per aging interval.
    re_encounter_interval_s: f64,
    base_config: &'a ScenarioConfig,
    base_settings: String,
}

/// Sorts values numerically when they all parse as numbers, otherwise
/// lexicographically, so output rows are ordered by (axis value, seed).
fn sorted_values(values: &[String]) -> Vec<String> {
    let mut sorted = values.to_vec();
    let nums: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
    match nums {
        Some(_) => sorted.sort_by(|a, b| {
            let fa: f64 = a.parse().unwrap();
            let fb: f64 = b.parse().unwrap();
            fa.partial_cmp(&fb).unwrap_or(std::cmp::Ordering::Equal)
        }),
        None => sorted.sort(),
    }
    sorted
}

/// Runs `|values| * |seeds|` independent simulations in parallel and
/// collects their rows in deterministic (axis value, seed) order.
pub fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepOutput, Error> {
    if spec.values.is_empty() {
        return Err(Error::Config(SettingsError::InvalidValue {
            key: settings::keys::SWEEP_VALUES.to_string(),
            line: 0,
            reason: "sweep needs at least one value".to_string(),
        }));
    }
    if spec.seeds.is_empty() {
        return Err(Error::Config(SettingsError::InvalidValue {
            key: settings::keys::SWEEP_SEEDS.to_string(),
            line: 0,
            reason: "sweep needs at least one seed".to_string(),
        }));
    }

    let values = sorted_values(&spec.values);
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();

    // Validate every axis value up front so a bad one aborts before any
    // simulation starts.
    let mut configs = Vec::with_capacity(values.len() * seeds.len());
    for value in &values {
        let swept = settings::apply_axis(base, &spec.axis, value).map_err(|e| Error::SweepRun {
            axis: spec.axis.clone(),
            value: value.clone(),
            reason: e.to_string(),
        })?;
        for &seed in &seeds {
            let mut config = swept.clone();
            config.rng_seed = seed;
            configs.push((value.clone(), seed, config));
        }
    }

    let results: Vec<Result<SweepRow, Error>> = configs
        .par_iter()
        .map(|(value, seed, config)| {
            let result = engine::run(config).map_err(|e| Error::SweepRun {
                axis: spec.axis.clone(),
                value: value.clone(),
                reason: e.to_string(),
            })?;
            let report = metrics::report(&result.log, config.audience_count);
            Ok(SweepRow {
                value: value.clone(),
                seed: *seed,
                csv_row: csv_row(config, Some((&spec.axis, value)), &report),
                report,
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_row);
        csv.push('\n');
    }

    let metadata = SweepMetadata {
        tool_version: env!("CARGO_PKG_VERSION"),
        axis: &spec.axis,
        values: &values,
        seeds: &seeds,
        re_encounter_interval_s: base.router_params.aging_interval,
        base_config: base,
        base_settings: settings::serialize_settings(base),
    };
    let metadata_json =
        serde_json::to_string_pretty(&metadata).expect("sweep metadata serialises");

    Ok(SweepOutput {
        rows,
        csv,
        metadata_json,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Persists a sweep: `results.csv` and `sweep_metadata.json` in `out_dir`.
pub fn write_sweep(output: &SweepOutput, out_dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_file(&out_dir.join("results.csv"), &output.csv)?;
    write_file(&out_dir.join("sweep_metadata.json"), &output.metadata_json)?;
    Ok(())
}

/// Writes arbitrary text output, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, contents: &str) -> Result<(), Error> {
    write_file(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::RouterKind;
    use crate::settings::keys;

    fn small_config() -> ScenarioConfig {
        let mut config = ScenarioConfig::baseline();
        config.audience_count = 9;
        config.sim_duration = 300.0;
        config.generation_interval = 60.0;
        config
    }

    #[test]
    fn single_run_produces_a_full_csv_row() {
        let output = run_single(&small_config()).unwrap();
        let fields: Vec<&str> = output.csv_row.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        assert_eq!(fields.len(), 13, "6 identity + 7 metric columns");
        assert_eq!(fields[0], "PROPHETV2");
        assert_eq!(fields[4], "");
        assert_eq!(fields[5], "");
        assert_eq!(fields[6], output.report.created.to_string());
    }

    #[test]
    fn identical_settings_give_identical_bytes() {
        let config = small_config();
        let a = run_single(&config).unwrap();
        let b = run_single(&config).unwrap();
        assert_eq!(a.csv_row, b.csv_row);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn isolated_artist_reports_zero_and_warns() {
        let mut config = small_config();
        config.artist_position = Some(crate::scenario::Point::new(-999.0, -999.0));
        let output = run_single(&config).unwrap();
        assert_eq!(output.report.delivery_probability, 0.0);
        assert_eq!(output.warnings.len(), 1);
    }

    #[test]
    fn sweep_row_count_is_values_times_seeds() {
        let spec = SweepSpec {
            axis: keys::SIM_DURATION.to_string(),
            values: vec!["120".into(), "60".into()],
            seeds: vec![2, 1, 3],
        };
        let output = run_sweep(&small_config(), &spec).unwrap();
        assert_eq!(output.rows.len(), 6);
        // ordered by (value, seed), numerically
        let order: Vec<(String, u64)> = output
            .rows
            .iter()
            .map(|r| (r.value.clone(), r.seed))
            .collect();
        assert_eq!(
            order,
            vec![
                ("60".to_string(), 1),
                ("60".to_string(), 2),
                ("60".to_string(), 3),
                ("120".to_string(), 1),
                ("120".to_string(), 2),
                ("120".to_string(), 3),
            ]
        );
        assert_eq!(output.csv.lines().count(), 7);
        assert!(output.metadata_json.contains("\"axis\""));
    }

    #[test]
    fn sweep_over_router_kind_is_allowed() {
        let spec = SweepSpec {
            axis: keys::ROUTER_KIND.to_string(),
            values: vec!["SPRAY_WAIT".into(), "PROPHET".into()],
            seeds: vec![1],
        };
        let output = run_sweep(&small_config(), &spec).unwrap();
        assert_eq!(output.rows.len(), 2);
        assert_eq!(output.rows[0].value, "PROPHET");
    }

    #[test]
    fn failing_axis_value_is_named() {
        let spec = SweepSpec {
            axis: keys::MESSAGE_TTL.to_string(),
            values: vec!["600".into(), "0".into()],
            seeds: vec![1],
        };
        match run_sweep(&small_config(), &spec) {
            Err(Error::SweepRun { axis, value, .. }) => {
                assert_eq!(axis, keys::MESSAGE_TTL);
                assert_eq!(value, "0");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn duration_axis_reproduces_the_hour_grid() {
        let mut config = small_config();
        config.router_kind = RouterKind::SprayWait;
        config.sim_duration = 60.0;
        let spec = SweepSpec {
            axis: keys::SIM_DURATION.to_string(),
            values: vec!["60".into(), "120".into(), "180".into(), "240".into(), "300".into()],
            seeds: vec![1],
        };
        let output = run_sweep(&config, &spec).unwrap();
        assert_eq!(output.rows.len(), 5);
    }
}

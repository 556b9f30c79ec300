//! Flat `key = value` settings files.
//!
//! Keys are namespaced (`scenario.*`, `engine.*`, `router.*`, `sweep.*`),
//! `#` starts a comment, and unknown or duplicate keys are hard errors so
//! typos never pass silently. Any key left out falls back to the baseline
//! default, so an empty file is a valid configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::scenario::{Point, RouterKind, ScenarioConfig};

/// Canonical settings key for every configuration field.
pub mod keys {
    pub const AUDIENCE_COUNT: &str = "scenario.audience_count";
    pub const ARTIST_POSITION: &str = "scenario.artist_position";
    pub const GRID_ORIGIN: &str = "scenario.grid_origin";
    pub const GRID_SPACING: &str = "scenario.grid_spacing";
    pub const RADIO_RANGE: &str = "scenario.radio_range";
    pub const LINK_BANDWIDTH: &str = "scenario.link_bandwidth";
    pub const MESSAGE_SIZE: &str = "scenario.message_size";
    pub const BUFFER_CAPACITY: &str = "scenario.buffer_capacity";
    pub const MESSAGE_TTL: &str = "scenario.message_ttl";
    pub const SIM_DURATION: &str = "scenario.sim_duration";
    pub const STEP_SIZE: &str = "engine.step_size";
    pub const GENERATION_INTERVAL: &str = "engine.generation_interval";
    pub const RNG_SEED: &str = "engine.rng_seed";
    pub const ROUTER_KIND: &str = "router.kind";
    pub const P_INIT: &str = "router.p_init";
    pub const P_ENC_MAX: &str = "router.p_enc_max";
    pub const I_TYP: &str = "router.i_typ";
    pub const BETA: &str = "router.beta";
    pub const GAMMA: &str = "router.gamma";
    pub const AGING_INTERVAL: &str = "router.aging_interval";
    pub const COPIES_L: &str = "router.copies_l";
    pub const FOCUS_THRESHOLD: &str = "router.focus_threshold";
    pub const FOCUS_TIMER_OFFSET: &str = "router.focus_timer_offset";
    pub const SWEEP_AXIS: &str = "sweep.axis";
    pub const SWEEP_VALUES: &str = "sweep.values";
    pub const SWEEP_SEEDS: &str = "sweep.seeds";
    pub const SWEEP_OUTPUT_DIR: &str = "sweep.output_dir";
}

/// Sweep defaults that may live in the settings file; command-line flags
/// override them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSettings {
    pub axis: Option<String>,
    pub values: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<String>,
}

/// A parsed settings file: the run configuration plus optional sweep keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: ScenarioConfig,
    pub sweep: SweepSettings,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SettingsError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: {key}: {reason}")]
    InvalidValue {
        key: String,
        line: usize,
        reason: String,
    },
    #[error("{}{key}: {reason}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invariant {
        key: String,
        reason: String,
        line: Option<usize>,
    },
}

/// Parses a settings file into a validated configuration.
pub fn parse_settings(text: &str) -> Result<Settings, SettingsError> {
    let mut config = ScenarioConfig::baseline();
    let mut sweep = SweepSettings::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(SettingsError::Syntax { line });
        };
        let key = key.trim();
        let value = value.trim();
        if seen.insert(key.to_string(), line).is_some() {
            return Err(SettingsError::DuplicateKey {
                key: key.to_string(),
                line,
            });
        }
        apply_key(&mut config, &mut sweep, key, value, line)?;
    }

    config.validate().map_err(|e| SettingsError::Invariant {
        key: e.key.to_string(),
        reason: e.reason.to_string(),
        line: seen.get(e.key).copied(),
    })?;
    Ok(Settings {
        scenario: config,
        sweep,
    })
}

/// Applies one sweep-axis value to a configuration and revalidates it.
/// Only scalar numeric or enum keys are sweepable.
pub fn apply_axis(
    config: &ScenarioConfig,
    axis: &str,
    value: &str,
) -> Result<ScenarioConfig, SettingsError> {
    if !is_sweepable(axis) {
        return Err(SettingsError::InvalidValue {
            key: keys::SWEEP_AXIS.to_string(),
            line: 0,
            reason: format!("`{axis}` is not a sweepable key"),
        });
    }
    let mut updated = config.clone();
    let mut sweep = SweepSettings::default();
    apply_key(&mut updated, &mut sweep, axis, value, 0)?;
    updated.validate().map_err(|e| SettingsError::Invariant {
        key: e.key.to_string(),
        reason: e.reason.to_string(),
        line: None,
    })?;
    Ok(updated)
}

/// Scalar numeric and enum keys that a sweep may vary. Coordinates are not
/// sweepable and the seed is the sweep's own second dimension.
pub fn is_sweepable(key: &str) -> bool {
    matches!(
        key,
        keys::AUDIENCE_COUNT
            | keys::GRID_SPACING
            | keys::RADIO_RANGE
            | keys::LINK_BANDWIDTH
            | keys::MESSAGE_SIZE
            | keys::BUFFER_CAPACITY
            | keys::MESSAGE_TTL
            | keys::SIM_DURATION
            | keys::STEP_SIZE
            | keys::GENERATION_INTERVAL
            | keys::ROUTER_KIND
            | keys::P_INIT
            | keys::P_ENC_MAX
            | keys::I_TYP
            | keys::BETA
            | keys::GAMMA
            | keys::AGING_INTERVAL
            | keys::COPIES_L
            | keys::FOCUS_THRESHOLD
            | keys::FOCUS_TIMER_OFFSET
    )
}

fn apply_key(
    config: &mut ScenarioConfig,
    sweep: &mut SweepSettings,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), SettingsError> {
    let invalid = |reason: String| SettingsError::InvalidValue {
        key: key.to_string(),
        line,
        reason,
    };
    match key {
        keys::AUDIENCE_COUNT => config.audience_count = parse_num(value).map_err(invalid)?,
        keys::ARTIST_POSITION => config.artist_position = Some(parse_point(value).map_err(invalid)?),
        keys::GRID_ORIGIN => config.grid_origin = parse_point(value).map_err(invalid)?,
        keys::GRID_SPACING => config.grid_spacing = parse_num(value).map_err(invalid)?,
        keys::RADIO_RANGE => config.radio_range = parse_num(value).map_err(invalid)?,
        keys::LINK_BANDWIDTH => config.link_bandwidth = parse_num(value).map_err(invalid)?,
        keys::MESSAGE_SIZE => config.message_size = parse_num(value).map_err(invalid)?,
        keys::BUFFER_CAPACITY => config.buffer_capacity = parse_num(value).map_err(invalid)?,
        keys::MESSAGE_TTL => config.message_ttl = parse_num(value).map_err(invalid)?,
        keys::SIM_DURATION => config.sim_duration = parse_num(value).map_err(invalid)?,
        keys::STEP_SIZE => config.step_size = parse_num(value).map_err(invalid)?,
        keys::GENERATION_INTERVAL => config.generation_interval = parse_num(value).map_err(invalid)?,
        keys::RNG_SEED => config.rng_seed = parse_num(value).map_err(invalid)?,
        keys::ROUTER_KIND => {
            config.router_kind = RouterKind::parse(value).ok_or_else(|| {
                invalid(format!(
                    "expected one of PROPHET, PROPHETV2, SPRAY_WAIT, SPRAY_FOCUS, got `{value}`"
                ))
            })?;
        }
        keys::P_INIT => config.router_params.p_init = parse_num(value).map_err(invalid)?,
        keys::P_ENC_MAX => config.router_params.p_enc_max = parse_num(value).map_err(invalid)?,
        keys::I_TYP => config.router_params.i_typ = parse_num(value).map_err(invalid)?,
        keys::BETA => config.router_params.beta = parse_num(value).map_err(invalid)?,
        keys::GAMMA => config.router_params.gamma = parse_num(value).map_err(invalid)?,
        keys::AGING_INTERVAL => {
            config.router_params.aging_interval = parse_num(value).map_err(invalid)?
        }
        keys::COPIES_L => config.router_params.copies_l = parse_num(value).map_err(invalid)?,
        keys::FOCUS_THRESHOLD => {
            config.router_params.focus_threshold = parse_num(value).map_err(invalid)?
        }
        keys::FOCUS_TIMER_OFFSET => {
            config.router_params.focus_timer_offset = parse_num(value).map_err(invalid)?
        }
        keys::SWEEP_AXIS => sweep.axis = Some(value.to_string()),
        keys::SWEEP_VALUES => sweep.values = Some(parse_list(value).map_err(invalid)?),
        keys::SWEEP_SEEDS => {
            let items = parse_list(value).map_err(invalid)?;
            let mut seeds = Vec::with_capacity(items.len());
            for item in items {
                seeds.push(parse_num::<u64>(&item).map_err(invalid)?);
            }
            sweep.seeds = Some(seeds);
        }
        keys::SWEEP_OUTPUT_DIR => sweep.output_dir = Some(value.to_string()),
        _ => {
            return Err(SettingsError::UnknownKey {
                key: key.to_string(),
                line,
            })
        }
    }
    Ok(())
}

trait ParseableNum: Sized {
    fn parse_from(s: &str) -> Result<Self, String>;
}

macro_rules! parseable {
    ($($t:ty),*) => {$(
        impl ParseableNum for $t {
            fn parse_from(s: &str) -> Result<Self, String> {
                s.parse::<$t>()
                    .map_err(|e| format!("cannot parse `{s}` as {}: {e}", stringify!($t)))
            }
        }
    )*};
}
parseable!(u32, u64, f64);

fn parse_num<T: ParseableNum>(value: &str) -> Result<T, String> {
    T::parse_from(value)
}

fn parse_point(value: &str) -> Result<Point, String> {
    let Some((x, y)) = value.split_once(',') else {
        return Err(format!("expected `x,y`, got `{value}`"));
    };
    Ok(Point::new(
        parse_num::<f64>(x.trim())?,
        parse_num::<f64>(y.trim())?,
    ))
}

fn parse_list(value: &str) -> Result<Vec<String>, String> {
    let items: Vec<String> = value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err("expected a non-empty comma-separated list".to_string());
    }
    Ok(items)
}

/// Renders a configuration in canonical settings form: every key present,
/// fixed order, the artist position resolved. Parsing the output reproduces
/// the configuration exactly.
pub fn serialize_settings(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let p = config.resolved_artist_position();
    let _ = writeln!(out, "{} = {}", keys::AUDIENCE_COUNT, config.audience_count);
    let _ = writeln!(out, "{} = {},{}", keys::ARTIST_POSITION, p.x, p.y);
    let _ = writeln!(
        out,
        "{} = {},{}",
        keys::GRID_ORIGIN, config.grid_origin.x, config.grid_origin.y
    );
    let _ = writeln!(out, "{} = {}", keys::GRID_SPACING, config.grid_spacing);
    let _ = writeln!(out, "{} = {}", keys::RADIO_RANGE, config.radio_range);
    let _ = writeln!(out, "{} = {}", keys::LINK_BANDWIDTH, config.link_bandwidth);
    let _ = writeln!(out, "{} = {}", keys::MESSAGE_SIZE, config.message_size);
    let _ = writeln!(out, "{} = {}", keys::BUFFER_CAPACITY, config.buffer_capacity);
    let _ = writeln!(out, "{} = {}", keys::MESSAGE_TTL, config.message_ttl);
    let _ = writeln!(out, "{} = {}", keys::SIM_DURATION, config.sim_duration);
    let _ = writeln!(out, "{} = {}", keys::STEP_SIZE, config.step_size);
    let _ = writeln!(
        out,
        "{} = {}",
        keys::GENERATION_INTERVAL, config.generation_interval
    );
    let _ = writeln!(out, "{} = {}", keys::RNG_SEED, config.rng_seed);
    let _ = writeln!(out, "{} = {}", keys::ROUTER_KIND, config.router_kind);
    let rp = &config.router_params;
    let _ = writeln!(out, "{} = {}", keys::P_INIT, rp.p_init);
    let _ = writeln!(out, "{} = {}", keys::P_ENC_MAX, rp.p_enc_max);
    let _ = writeln!(out, "{} = {}", keys::I_TYP, rp.i_typ);
    let _ = writeln!(out, "{} = {}", keys::BETA, rp.beta);
    let _ = writeln!(out, "{} = {}", keys::GAMMA, rp.gamma);
    let _ = writeln!(out, "{} = {}", keys::AGING_INTERVAL, rp.aging_interval);
    let _ = writeln!(out, "{} = {}", keys::COPIES_L, rp.copies_l);
    let _ = writeln!(out, "{} = {}", keys::FOCUS_THRESHOLD, rp.focus_threshold);
    let _ = writeln!(
        out,
        "{} = {}",
        keys::FOCUS_TIMER_OFFSET, rp.focus_timer_offset
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_the_baseline() {
        let settings = parse_settings("").unwrap();
        assert_eq!(settings.scenario, ScenarioConfig::baseline());
    }

    #[test]
    fn audience_count_round_trips() {
        let settings = parse_settings("scenario.audience_count = 100\n").unwrap();
        assert_eq!(settings.scenario.audience_count, 100);
    }

    #[test]
    fn spray_focus_with_copies_is_accepted() {
        let text = "router.kind = SPRAY_FOCUS\nrouter.copies_l = 10\n";
        let settings = parse_settings(text).unwrap();
        assert_eq!(settings.scenario.router_kind, RouterKind::SprayFocus);
        assert_eq!(settings.scenario.router_params.copies_l, 10);
    }

    #[test]
    fn zero_ttl_is_rejected_with_key_and_line() {
        let text = "# comment\nscenario.message_ttl = 0\n";
        match parse_settings(text) {
            Err(SettingsError::Invariant { key, line, .. }) => {
                assert_eq!(key, keys::MESSAGE_TTL);
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors() {
        match parse_settings("scenario.audince_count = 5\n") {
            Err(SettingsError::UnknownKey { key, line }) => {
                assert_eq!(key, "scenario.audince_count");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_errors() {
        let text = "engine.rng_seed = 1\nengine.rng_seed = 2\n";
        assert!(matches!(
            parse_settings(text),
            Err(SettingsError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# full line comment\nscenario.radio_range = 12 # trailing\n\n";
        let settings = parse_settings(text).unwrap();
        assert_eq!(settings.scenario.radio_range, 12.0);
    }

    #[test]
    fn serialization_is_a_parse_fixed_point() {
        let text = "scenario.audience_count = 51\nrouter.kind = SPRAY_WAIT\nengine.rng_seed = 7\n";
        let first = parse_settings(text).unwrap().scenario;
        let canon = serialize_settings(&first);
        let second = parse_settings(&canon).unwrap().scenario;
        assert_eq!(serialize_settings(&second), canon);
        // The only change canonicalisation makes is resolving the artist
        // position; everything else round-trips exactly.
        assert_eq!(second.audience_count, first.audience_count);
        assert_eq!(second.router_kind, first.router_kind);
        assert_eq!(
            second.artist_position,
            Some(first.resolved_artist_position())
        );
    }

    #[test]
    fn sweep_keys_parse() {
        let text = "sweep.axis = router.copies_l\nsweep.values = 10, 25, 50, 100\nsweep.seeds = 1,2,3\nsweep.output_dir = out\n";
        let settings = parse_settings(text).unwrap();
        assert_eq!(settings.sweep.axis.as_deref(), Some("router.copies_l"));
        assert_eq!(
            settings.sweep.values,
            Some(vec!["10".into(), "25".into(), "50".into(), "100".into()])
        );
        assert_eq!(settings.sweep.seeds, Some(vec![1, 2, 3]));
        assert_eq!(settings.sweep.output_dir.as_deref(), Some("out"));
    }

    #[test]
    fn axis_application_revalidates() {
        let base = ScenarioConfig::baseline();
        let swept = apply_axis(&base, keys::SIM_DURATION, "3600").unwrap();
        assert_eq!(swept.sim_duration, 3600.0);
        assert!(apply_axis(&base, keys::MESSAGE_TTL, "0").is_err());
        assert!(apply_axis(&base, keys::ARTIST_POSITION, "1,2").is_err());
        assert!(apply_axis(&base, "scenario.nope", "1").is_err());
    }

    #[test]
    fn malformed_lines_report_their_number() {
        assert!(matches!(
            parse_settings("scenario.radio_range 10\n"),
            Err(SettingsError::Syntax { line: 1 })
        ));
        assert!(matches!(
            parse_settings("scenario.radio_range = ten\n"),
            Err(SettingsError::InvalidValue { line: 1, .. })
        ));
    }
}

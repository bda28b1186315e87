//! Run configuration and topology files.
//!
//! Both use the same line format: `[section]` headers, `key = value` entries
//! and `#` comments. Values are numbers, booleans, bare words, `"quoted
//! strings"` or `[comma, separated, lists]`. Keys carry their unit as a
//! suffix. Missing keys take their defaults; unknown keys and sections are
//! rejected.
//!
//! ```text
//! [run]
//! seed = 1
//!
//! [topology]
//! source = generator
//! shape = tree
//! small_cells = 4
//!
//! [sweep]
//! axis = snr_db
//! values = [0, 5, 10]
//! seeds = [1, 2, 3]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ee::{EeError, ProblemInstance};
use crate::experiments::{
    assemble_instance, derive_seed, fmt_f64, stream, InstanceTemplate, Method, OptimizerParams, PowerParams,
    SweepAxis, SweepSpec, UserParams,
};
use crate::queueing::CtmcSpec;
use crate::radio::{Band, RadioConfig, UserChannel};
use crate::topology::{build_incidence, GeneratorParams, Link, Node, NodeKind, Topology, TopologyShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("{field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("cannot read {}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "E_PARSE",
            ConfigError::Validation { .. } => "E_VALIDATION",
            ConfigError::MissingFile { .. } => "E_MISSING_FILE",
            ConfigError::Io { .. } => "E_IO",
        }
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), reason: reason.into() }
}

// ---------------------------------------------------------------------------
// line format

#[derive(Debug, Clone, PartialEq)]
enum Scalar {
    Bare(String),
    Quoted(String),
}

impl Scalar {
    fn text(&self) -> &str {
        match self {
            Scalar::Bare(s) | Scalar::Quoted(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    line: usize,
    key_col: usize,
    value_col: usize,
    value: Value,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

fn parse_error(line: usize, col: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, col, msg: msg.into() }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Drops a trailing comment, leaving `#` inside quotes alone.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_scalar(text: &str, line: usize, col: usize) -> Result<Scalar, ConfigError> {
    if let Some(rest) = text.strip_prefix('"') {
        let Some(inner) = rest.strip_suffix('"') else {
            return Err(parse_error(line, col, "unterminated string"));
        };
        if inner.contains('"') {
            return Err(parse_error(line, col, "stray quote inside string"));
        }
        return Ok(Scalar::Quoted(inner.to_string()));
    }
    if text.is_empty() {
        return Err(parse_error(line, col, "missing value"));
    }
    if text.contains(|c: char| c.is_whitespace() || matches!(c, '"' | '[' | ']' | ',' | '=')) {
        return Err(parse_error(line, col, format!("unexpected characters in value `{text}`")));
    }
    Ok(Scalar::Bare(text.to_string()))
}

fn parse_document(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw);
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(parse_error(line, indent + 1, "section header is missing `]`"));
            };
            let name = name.trim();
            if !is_ident(name) {
                return Err(parse_error(line, indent + 2, format!("invalid section name `{name}`")));
            }
            sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parse_error(line, indent + 1, "expected `key = value` or `[section]`"));
        };
        let key = content[..eq].trim();
        if !is_ident(key) {
            return Err(parse_error(line, indent + 1, format!("invalid key `{key}`")));
        }
        let Some(section) = sections.last_mut() else {
            return Err(parse_error(line, indent + 1, format!("key `{key}` appears before any section")));
        };
        let after = &content[eq + 1..];
        let value_col = eq + 2 + (after.len() - after.trim_start().len());
        let vtext = after.trim();
        let value = if let Some(rest) = vtext.strip_prefix('[') {
            let Some(inner) = rest.strip_suffix(']') else {
                return Err(parse_error(line, value_col, "list is missing `]`"));
            };
            let inner = inner.trim();
            let items = if inner.is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|item| parse_scalar(item.trim(), line, value_col))
                    .collect::<Result<Vec<_>, _>>()?
            };
            Value::List(items)
        } else {
            Value::Scalar(parse_scalar(vtext, line, value_col)?)
        };
        if section.entries.iter().any(|e| e.key == key) {
            return Err(parse_error(line, indent + 1, format!("duplicate key `{key}` in [{}]", section.name)));
        }
        section.entries.push(Entry { key: key.to_string(), line, key_col: indent + 1, value_col, value });
    }
    Ok(sections)
}

/// Typed, consuming access to one section's entries.
struct Reader {
    section: String,
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn new(s: Section) -> Self {
        let entries = s.entries.into_iter().map(|e| (e.key.clone(), e)).collect();
        Reader { section: s.name, entries }
    }

    fn scalar(&mut self, key: &str) -> Result<Option<(Scalar, usize, usize)>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Entry { value: Value::Scalar(s), line, value_col, .. }) => Ok(Some((s, line, value_col))),
            Some(e) => Err(parse_error(e.line, e.value_col, format!("`{key}` expects a single value, not a list"))),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(Vec<Scalar>, usize, usize)>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Entry { value: Value::List(v), line, value_col, .. }) => Ok(Some((v, line, value_col))),
            Some(Entry { value: Value::Scalar(s), line, value_col, .. }) => Ok(Some((vec![s], line, value_col))),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((s, line, col)) = self.scalar(key)? else { return Ok(None) };
        parse_f64(s.text(), line, col, key).map(Some)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        let Some((s, line, col)) = self.scalar(key)? else { return Ok(None) };
        parse_u64(s.text(), line, col, key).map(Some)
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        Ok(self.opt_u64(key)?.unwrap_or(default))
    }

    fn opt_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some((s, line, col)) = self.scalar(key)? else { return Ok(None) };
        let v = parse_u64(s.text(), line, col, key)?;
        usize::try_from(v).map(Some).map_err(|_| parse_error(line, col, format!("`{key}` is too large")))
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.opt_usize(key)?.unwrap_or(default))
    }

    fn opt_bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some((s, line, col)) = self.scalar(key)? else { return Ok(None) };
        match s.text() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            other => Err(parse_error(line, col, format!("`{key}` expects true or false, got `{other}`"))),
        }
    }

    fn opt_str(&mut self, key: &str) -> Result<Option<(String, usize, usize)>, ConfigError> {
        Ok(self.scalar(key)?.map(|(s, line, col)| (s.text().to_string(), line, col)))
    }

    fn choice<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> Option<T>,
        allowed: &str,
    ) -> Result<T, ConfigError> {
        match self.opt_str(key)? {
            None => Ok(default),
            Some((s, line, col)) => parse(&s)
                .ok_or_else(|| parse_error(line, col, format!("`{key}` must be one of {allowed}, got `{s}`"))),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((items, line, col)) = self.list(key)? else { return Ok(None) };
        items.iter().map(|s| parse_f64(s.text(), line, col, key)).collect::<Result<_, _>>().map(Some)
    }

    fn u64_list(&mut self, key: &str) -> Result<Option<Vec<u64>>, ConfigError> {
        let Some((items, line, col)) = self.list(key)? else { return Ok(None) };
        items.iter().map(|s| parse_u64(s.text(), line, col, key)).collect::<Result<_, _>>().map(Some)
    }

    fn str_list(&mut self, key: &str) -> Result<Option<(Vec<String>, usize, usize)>, ConfigError> {
        Ok(self.list(key)?.map(|(v, line, col)| (v.iter().map(|s| s.text().to_string()).collect(), line, col)))
    }

    /// Rejects whatever was not consumed.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_values().min_by_key(|e| e.line) {
            None => Ok(()),
            Some(e) => Err(parse_error(e.line, e.key_col, format!("unknown key `{}` in [{}]", e.key, self.section))),
        }
    }
}

fn parse_f64(text: &str, line: usize, col: usize, key: &str) -> Result<f64, ConfigError> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line, col, format!("`{key}` expects a finite number, got `{text}`"))),
    }
}

fn parse_u64(text: &str, line: usize, col: usize, key: &str) -> Result<u64, ConfigError> {
    text.parse::<u64>()
        .map_err(|_| parse_error(line, col, format!("`{key}` expects a non-negative integer, got `{text}`")))
}

fn read_file(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ConfigError::MissingFile { path: path.to_path_buf() },
        _ => ConfigError::Io { path: path.to_path_buf(), reason: e.to_string() },
    })
}

// ---------------------------------------------------------------------------
// run configuration

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    /// Generated; node budgets come from the power section.
    Generator(GeneratorParams),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub name: String,
    pub spec: CtmcSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub name: String,
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub topology: TopologySource,
    pub capacity_scale: f64,
    pub radio: RadioConfig,
    pub users: UserParams,
    pub power: PowerParams,
    pub optimizer: OptimizerParams,
    pub queues: Vec<QueueEntry>,
    pub sweeps: Vec<SweepEntry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out_dir: None,
            topology: TopologySource::Generator(GeneratorParams::default()),
            capacity_scale: 1.0,
            radio: RadioConfig::default(),
            users: UserParams::default(),
            power: PowerParams::default(),
            optimizer: OptimizerParams::default(),
            queues: Vec::new(),
            sweeps: Vec::new(),
        }
    }
}

const REPEATABLE: [&str; 2] = ["queue", "sweep"];
const SECTIONS: [&str; 8] = ["run", "topology", "radio", "users", "power", "optimizer", "queue", "sweep"];

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = read_file(path)?;
    parse_config_str(&text, path.parent())
}

/// Parses and validates a configuration. Relative file references resolve
/// against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let sections = parse_document(text)?;
    let mut cfg = RunConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for section in sections {
        if !SECTIONS.contains(&section.name.as_str()) {
            return Err(parse_error(section.line, 2, format!("unknown section [{}]", section.name)));
        }
        if !REPEATABLE.contains(&section.name.as_str()) && seen.contains(&section.name) {
            return Err(parse_error(section.line, 2, format!("section [{}] appears twice", section.name)));
        }
        seen.push(section.name.clone());
        let name = section.name.clone();
        let mut r = Reader::new(section);
        match name.as_str() {
            "run" => {
                cfg.seed = r.u64("seed", cfg.seed)?;
                cfg.out_dir = r.opt_str("out_dir")?.map(|(s, ..)| PathBuf::from(s));
            }
            "topology" => {
                cfg.capacity_scale = r.f64("capacity_scale", 1.0)?;
                cfg.topology = read_topology_section(&mut r, base_dir)?;
            }
            "radio" => cfg.radio = read_radio(&mut r)?,
            "users" => cfg.users = read_users(&mut r)?,
            "power" => {
                let d = PowerParams::default();
                cfg.power = PowerParams {
                    bs_max_power_dbm: r.f64("bs_max_power_dbm", d.bs_max_power_dbm)?,
                    tx_backoff_db: r.f64("tx_backoff_db", d.tx_backoff_db)?,
                    sensor_power_min_w: r.f64("sensor_power_min_w", d.sensor_power_min_w)?,
                    sensor_power_max_w: r.f64("sensor_power_max_w", d.sensor_power_max_w)?,
                };
            }
            "optimizer" => {
                let d = OptimizerParams::default();
                cfg.optimizer = OptimizerParams {
                    tol: r.f64("tol", d.tol)?,
                    max_bisection_iters: r.usize("max_bisection_iters", d.max_bisection_iters)?,
                    upper_iteration_bound: r.usize("upper_iteration_bound", d.upper_iteration_bound)?,
                };
            }
            "queue" => {
                let default_name = format!("q{}", cfg.queues.len() + 1);
                cfg.queues.push(read_queue(&mut r, default_name)?);
            }
            "sweep" => cfg.sweeps.push(read_sweep(&mut r)?),
            _ => unreachable!("section list checked above"),
        }
        r.finish()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_topology_section(r: &mut Reader, base_dir: Option<&Path>) -> Result<TopologySource, ConfigError> {
    let d = GeneratorParams::default();
    let source = r.opt_str("source")?;
    let file = r.opt_str("file")?;
    let keys = ["shape", "small_cells", "extra_links", "distance_min_km", "distance_max_km"];
    let kind = match &source {
        None if file.is_some() => "file",
        None => "generator",
        Some((s, line, col)) => match s.as_str() {
            "generator" | "file" => s.as_str(),
            _ => return Err(parse_error(*line, *col, format!("`source` must be generator or file, got `{s}`"))),
        },
    };
    if kind == "file" {
        let Some((path, ..)) = file else {
            return Err(invalid("topology.file", "source = file needs a `file` entry"));
        };
        if let Some(key) = keys.iter().find(|k| r.entries.contains_key(**k)) {
            return Err(invalid(format!("topology.{key}"), "generator settings conflict with source = file"));
        }
        let path = PathBuf::from(path);
        let path = match base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path,
        };
        if !path.is_file() {
            return Err(ConfigError::MissingFile { path });
        }
        return Ok(TopologySource::File(path));
    }
    if file.is_some() {
        return Err(invalid("topology.file", "a topology file conflicts with source = generator"));
    }
    Ok(TopologySource::Generator(GeneratorParams {
        shape: r.choice("shape", d.shape, TopologyShape::parse, "line, star, tree")?,
        small_cells: r.usize("small_cells", d.small_cells)?,
        extra_links: r.usize("extra_links", d.extra_links)?,
        distance_min_km: r.f64("distance_min_km", d.distance_min_km)?,
        distance_max_km: r.f64("distance_max_km", d.distance_max_km)?,
        ..d
    }))
}

fn read_radio(r: &mut Reader) -> Result<RadioConfig, ConfigError> {
    let d = RadioConfig::default();
    let subcarriers = |r: &mut Reader, key: &str, default: u32| -> Result<u32, ConfigError> {
        let v = r.usize(key, default as usize)?;
        u32::try_from(v).map_err(|_| invalid(format!("radio.{key}"), "too large"))
    };
    Ok(RadioConfig {
        macro_bandwidth_hz: r.f64("macro_bandwidth_hz", d.macro_bandwidth_hz)?,
        macro_subcarriers: subcarriers(r, "macro_subcarriers", d.macro_subcarriers)?,
        small_bandwidth_hz: r.f64("small_bandwidth_hz", d.small_bandwidth_hz)?,
        small_subcarriers: subcarriers(r, "small_subcarriers", d.small_subcarriers)?,
        noise_variance_macro_watts: r.f64("noise_variance_macro_w", d.noise_variance_macro_watts)?,
        noise_variance_small_watts: r.f64("noise_variance_small_w", d.noise_variance_small_watts)?,
        noise_figure_db: r.f64("noise_figure_db", d.noise_figure_db)?,
        thermal_noise_dbm: r.f64("thermal_noise_dbm", d.thermal_noise_dbm)?,
        tx_loss_db: r.f64("tx_loss_db", d.tx_loss_db)?,
        rx_loss_db: r.f64("rx_loss_db", d.rx_loss_db)?,
        link_margin_db: r.f64("link_margin_db", d.link_margin_db)?,
        rx_gain_dbi: r.f64("rx_gain_dbi", d.rx_gain_dbi)?,
        tx_gain_dbi_e: r.f64("tx_gain_e_dbi", d.tx_gain_dbi_e)?,
        tx_gain_dbi_v: r.f64("tx_gain_v_dbi", d.tx_gain_dbi_v)?,
        e_band_freq_ghz: r.f64("e_band_freq_ghz", d.e_band_freq_ghz)?,
        v_band_freq_ghz: r.f64("v_band_freq_ghz", d.v_band_freq_ghz)?,
        backhaul_bandwidth_hz: r.f64("backhaul_bandwidth_hz", d.backhaul_bandwidth_hz)?,
        atmos_db_per_km: read_atmos(r, d.atmos_db_per_km)?,
        y_min_bps: r.f64("y_min_bps", d.y_min_bps)?,
        y_max_bps: r.f64("y_max_bps", d.y_max_bps)?,
    })
}

/// Either the combined `atmos_db_per_km` or any of its oxygen, vapour and
/// rain parts, which are summed.
fn read_atmos(r: &mut Reader, default: f64) -> Result<f64, ConfigError> {
    let combined = r.opt_f64("atmos_db_per_km")?;
    let mut parts = None;
    for key in ["atmos_o2_db_per_km", "atmos_vapour_db_per_km", "atmos_rain_db_per_km"] {
        if let Some(v) = r.opt_f64(key)? {
            if !(v >= 0.0) {
                return Err(invalid(format!("radio.{key}"), "must be non-negative"));
            }
            parts = Some(parts.unwrap_or(0.0) + v);
        }
    }
    match (combined, parts) {
        (Some(_), Some(_)) => Err(invalid("radio.atmos_db_per_km", "give the combined value or its parts, not both")),
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (None, None) => Ok(default),
    }
}

fn read_users(r: &mut Reader) -> Result<UserParams, ConfigError> {
    let d = UserParams::default();
    let target_snr_db = match r.opt_str("target_snr_db")? {
        Some((s, ..)) if s == "none" => None,
        Some((s, line, col)) => Some(parse_f64(&s, line, col, "target_snr_db")?),
        None => d.target_snr_db,
    };
    Ok(UserParams {
        macro_users: r.usize("macro_users", d.macro_users)?,
        users_per_cell: r.usize("users_per_cell", d.users_per_cell)?,
        total_users: r.opt_usize("total_users")?,
        gain_min_db: r.f64("gain_min_db", d.gain_min_db)?,
        gain_max_db: r.f64("gain_max_db", d.gain_max_db)?,
        target_snr_db,
    })
}

fn read_queue(r: &mut Reader, default_name: String) -> Result<QueueEntry, ConfigError> {
    let d = CtmcSpec::default();
    let name = r.opt_str("name")?.map_or(default_name, |(s, ..)| s);
    Ok(QueueEntry {
        name,
        spec: CtmcSpec {
            channels: r.usize("channels", d.channels)?,
            queue_r: r.usize("queue_r", d.queue_r)?,
            queue_tau: r.usize("queue_tau", d.queue_tau)?,
            lambda_s: r.f64("lambda_s_per_s", d.lambda_s)?,
            lambda_r: r.f64("lambda_r_per_s", d.lambda_r)?,
            lambda_tau: r.f64("lambda_tau_per_s", d.lambda_tau)?,
            mu_s: r.f64("mu_s_per_s", d.mu_s)?,
            mu_r: r.f64("mu_r_per_s", d.mu_r)?,
            mu_tau: r.f64("mu_tau_per_s", d.mu_tau)?,
            alpha_s: r.f64("alpha_s", d.alpha_s)?,
            alpha_v: r.f64("alpha_v", d.alpha_v)?,
        },
    })
}

fn read_sweep(r: &mut Reader) -> Result<SweepEntry, ConfigError> {
    let axis = match r.opt_str("axis")? {
        None => return Err(invalid("sweep.axis", "missing")),
        Some((s, line, col)) => SweepAxis::parse(&s)
            .ok_or_else(|| parse_error(line, col, format!("`axis` must be snr_db, user_count or backhaul, got `{s}`")))?,
    };
    let name = r.opt_str("name")?.map_or_else(|| axis.as_str().to_string(), |(s, ..)| s);
    let values = r.f64_list("values")?.ok_or_else(|| invalid("sweep.values", "missing"))?;
    let seeds = r.u64_list("seeds")?.ok_or_else(|| invalid("sweep.seeds", "missing"))?;
    let methods = match r.str_list("methods")? {
        None => Method::ALL.to_vec(),
        Some((names, line, col)) => names
            .iter()
            .map(|m| {
                Method::parse(m).ok_or_else(|| {
                    parse_error(line, col, format!("unknown method `{m}` (optimized, equal_power, random_power)"))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(SweepEntry { name, spec: SweepSpec { axis, values, seeds, methods } })
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Range checks on every field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let TopologySource::Generator(g) = &self.topology {
            if g.small_cells == 0 {
                return Err(invalid("topology.small_cells", "must be at least 1"));
            }
            positive("topology.distance_min_km", g.distance_min_km)?;
            if g.distance_max_km < g.distance_min_km {
                return Err(invalid(
                    "topology.distance_min_km/topology.distance_max_km",
                    "distance_min_km exceeds distance_max_km",
                ));
            }
        }
        positive("topology.capacity_scale", self.capacity_scale)?;

        let r = &self.radio;
        positive("radio.macro_bandwidth_hz", r.macro_bandwidth_hz)?;
        positive("radio.small_bandwidth_hz", r.small_bandwidth_hz)?;
        positive("radio.macro_subcarriers", f64::from(r.macro_subcarriers))?;
        positive("radio.small_subcarriers", f64::from(r.small_subcarriers))?;
        positive("radio.noise_variance_macro_w", r.noise_variance_macro_watts)?;
        positive("radio.noise_variance_small_w", r.noise_variance_small_watts)?;
        positive("radio.e_band_freq_ghz", r.e_band_freq_ghz)?;
        positive("radio.v_band_freq_ghz", r.v_band_freq_ghz)?;
        positive("radio.backhaul_bandwidth_hz", r.backhaul_bandwidth_hz)?;
        if r.atmos_db_per_km < 0.0 {
            return Err(invalid("radio.atmos_db_per_km", "must be non-negative"));
        }
        positive("radio.y_min_bps", r.y_min_bps)?;
        if r.y_min_bps > r.y_max_bps {
            return Err(invalid(
                "radio.y_min_bps/radio.y_max_bps",
                format!("y_min_bps ({}) exceeds y_max_bps ({})", r.y_min_bps, r.y_max_bps),
            ));
        }

        let u = &self.users;
        if u.gain_min_db > u.gain_max_db {
            return Err(invalid("users.gain_min_db/users.gain_max_db", "gain_min_db exceeds gain_max_db"));
        }
        match u.total_users {
            Some(0) => return Err(invalid("users.total_users", "must be at least 1")),
            None if u.macro_users == 0 && u.users_per_cell == 0 => {
                return Err(invalid("users.macro_users/users.users_per_cell", "no users would be generated"))
            }
            _ => {}
        }

        let p = &self.power;
        positive("power.sensor_power_min_w", p.sensor_power_min_w)?;
        if p.sensor_power_min_w > p.sensor_power_max_w {
            return Err(invalid(
                "power.sensor_power_min_w/power.sensor_power_max_w",
                "sensor_power_min_w exceeds sensor_power_max_w",
            ));
        }
        if p.tx_backoff_db < 0.0 {
            return Err(invalid("power.tx_backoff_db", "must be non-negative"));
        }

        let o = &self.optimizer;
        if !(o.tol > 0.0 && o.tol < 1.0) {
            return Err(invalid("optimizer.tol", format!("must lie in (0, 1), got {}", o.tol)));
        }
        if o.max_bisection_iters == 0 {
            return Err(invalid("optimizer.max_bisection_iters", "must be at least 1"));
        }
        if o.upper_iteration_bound == 0 {
            return Err(invalid("optimizer.upper_iteration_bound", "must be at least 1"));
        }

        for (i, q) in self.queues.iter().enumerate() {
            if !is_ident(&q.name) {
                return Err(invalid(format!("queue.{}", q.name), "name must use [a-z0-9_]"));
            }
            if self.queues[..i].iter().any(|o| o.name == q.name) {
                return Err(invalid(format!("queue.{}", q.name), "duplicate queue name"));
            }
            q.spec.validate().map_err(|e| invalid(format!("queue.{}", q.name), e.to_string()))?;
        }
        for (i, s) in self.sweeps.iter().enumerate() {
            if !is_ident(&s.name) {
                return Err(invalid(format!("sweep.{}", s.name), "name must use [a-z0-9_]"));
            }
            if self.sweeps[..i].iter().any(|o| o.name == s.name) {
                return Err(invalid(format!("sweep.{}", s.name), "duplicate sweep name"));
            }
            s.spec.validate().map_err(|e| invalid(format!("sweep.{}", s.name), e.to_string()))?;
        }
        Ok(())
    }

    /// Instance template for generated topologies.
    pub fn template(&self) -> Option<InstanceTemplate> {
        match &self.topology {
            TopologySource::Generator(g) => Some(InstanceTemplate {
                generator: g.clone(),
                radio: self.radio.clone(),
                users: self.users.clone(),
                power: self.power.clone(),
                capacity_scale: self.capacity_scale,
            }),
            TopologySource::File(_) => None,
        }
    }

    /// The instance `solve` works on.
    pub fn instance(&self) -> Result<ProblemInstance, InstanceError> {
        let seed = derive_seed(self.seed, 0);
        match &self.topology {
            TopologySource::Generator(_) => {
                let t = self.template().expect("generator source");
                t.build(seed).map_err(|e| match e {
                    crate::experiments::ExperimentError::Ee(e) => InstanceError::Ee(e),
                    other => InstanceError::Config(invalid("topology", other.to_string())),
                })
            }
            TopologySource::File(path) => {
                let file = load_topology_file(path, &self.radio, self.power.budget_watts())?;
                let mut topo = file.topology;
                if self.capacity_scale != 1.0 {
                    let s = self.capacity_scale;
                    topo = topo
                        .with_capacities(|l| l.capacity_bps * s)
                        .map_err(|e| invalid("topology.capacity_scale", e.to_string()))?;
                }
                let generated = file.users.is_empty();
                let (users, overrides): (Vec<UserChannel>, Vec<Option<(f64, f64)>>) = if generated {
                    let u = self.users.generate(topo.n_nodes(), derive_seed(seed, stream::USERS));
                    let n = u.len();
                    (u, vec![None; n])
                } else {
                    file.users.into_iter().map(|u| (u.channel, u.rate_bounds)).unzip()
                };
                let inst = assemble_instance(topo, users, &self.radio, self.users.target_snr_db, &self.power)?;
                if overrides.iter().all(Option::is_none) {
                    return Ok(inst);
                }
                let bounds = inst.rate_bounds.iter().zip(&overrides).map(|(b, o)| o.unwrap_or(*b)).collect();
                Ok(inst.with_rate_bounds(bounds)?)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ee(#[from] EeError),
}

/// Canonical text form; parsing it yields an equal configuration.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let kv = |out: &mut String, k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    let quote = |s: &str| format!("\"{s}\"");
    out.push_str("[run]\n");
    kv(&mut out, "seed", cfg.seed.to_string());
    if let Some(dir) = &cfg.out_dir {
        kv(&mut out, "out_dir", quote(&dir.to_string_lossy()));
    }

    out.push_str("\n[topology]\n");
    match &cfg.topology {
        TopologySource::Generator(g) => {
            kv(&mut out, "source", "generator".into());
            kv(&mut out, "shape", g.shape.as_str().into());
            kv(&mut out, "small_cells", g.small_cells.to_string());
            kv(&mut out, "extra_links", g.extra_links.to_string());
            kv(&mut out, "distance_min_km", fmt_f64(g.distance_min_km));
            kv(&mut out, "distance_max_km", fmt_f64(g.distance_max_km));
        }
        TopologySource::File(p) => {
            kv(&mut out, "source", "file".into());
            kv(&mut out, "file", quote(&p.to_string_lossy()));
        }
    }
    kv(&mut out, "capacity_scale", fmt_f64(cfg.capacity_scale));

    let r = &cfg.radio;
    out.push_str("\n[radio]\n");
    for (k, v) in [
        ("macro_bandwidth_hz", r.macro_bandwidth_hz),
        ("small_bandwidth_hz", r.small_bandwidth_hz),
        ("noise_variance_macro_w", r.noise_variance_macro_watts),
        ("noise_variance_small_w", r.noise_variance_small_watts),
        ("noise_figure_db", r.noise_figure_db),
        ("thermal_noise_dbm", r.thermal_noise_dbm),
        ("tx_loss_db", r.tx_loss_db),
        ("rx_loss_db", r.rx_loss_db),
        ("link_margin_db", r.link_margin_db),
        ("rx_gain_dbi", r.rx_gain_dbi),
        ("tx_gain_e_dbi", r.tx_gain_dbi_e),
        ("tx_gain_v_dbi", r.tx_gain_dbi_v),
        ("e_band_freq_ghz", r.e_band_freq_ghz),
        ("v_band_freq_ghz", r.v_band_freq_ghz),
        ("backhaul_bandwidth_hz", r.backhaul_bandwidth_hz),
        ("atmos_db_per_km", r.atmos_db_per_km),
        ("y_min_bps", r.y_min_bps),
        ("y_max_bps", r.y_max_bps),
    ] {
        kv(&mut out, k, fmt_f64(v));
    }
    kv(&mut out, "macro_subcarriers", r.macro_subcarriers.to_string());
    kv(&mut out, "small_subcarriers", r.small_subcarriers.to_string());

    let u = &cfg.users;
    out.push_str("\n[users]\n");
    kv(&mut out, "macro_users", u.macro_users.to_string());
    kv(&mut out, "users_per_cell", u.users_per_cell.to_string());
    if let Some(t) = u.total_users {
        kv(&mut out, "total_users", t.to_string());
    }
    kv(&mut out, "gain_min_db", fmt_f64(u.gain_min_db));
    kv(&mut out, "gain_max_db", fmt_f64(u.gain_max_db));
    kv(&mut out, "target_snr_db", u.target_snr_db.map_or("none".into(), fmt_f64));

    let p = &cfg.power;
    out.push_str("\n[power]\n");
    kv(&mut out, "bs_max_power_dbm", fmt_f64(p.bs_max_power_dbm));
    kv(&mut out, "tx_backoff_db", fmt_f64(p.tx_backoff_db));
    kv(&mut out, "sensor_power_min_w", fmt_f64(p.sensor_power_min_w));
    kv(&mut out, "sensor_power_max_w", fmt_f64(p.sensor_power_max_w));

    let o = &cfg.optimizer;
    out.push_str("\n[optimizer]\n");
    kv(&mut out, "tol", fmt_f64(o.tol));
    kv(&mut out, "max_bisection_iters", o.max_bisection_iters.to_string());
    kv(&mut out, "upper_iteration_bound", o.upper_iteration_bound.to_string());

    for q in &cfg.queues {
        let s = &q.spec;
        out.push_str("\n[queue]\n");
        kv(&mut out, "name", quote(&q.name));
        kv(&mut out, "channels", s.channels.to_string());
        kv(&mut out, "queue_r", s.queue_r.to_string());
        kv(&mut out, "queue_tau", s.queue_tau.to_string());
        for (k, v) in [
            ("lambda_s_per_s", s.lambda_s),
            ("lambda_r_per_s", s.lambda_r),
            ("lambda_tau_per_s", s.lambda_tau),
            ("mu_s_per_s", s.mu_s),
            ("mu_r_per_s", s.mu_r),
            ("mu_tau_per_s", s.mu_tau),
            ("alpha_s", s.alpha_s),
            ("alpha_v", s.alpha_v),
        ] {
            kv(&mut out, k, fmt_f64(v));
        }
    }
    for s in &cfg.sweeps {
        out.push_str("\n[sweep]\n");
        kv(&mut out, "name", quote(&s.name));
        kv(&mut out, "axis", s.spec.axis.as_str().into());
        let join = |v: Vec<String>| format!("[{}]", v.join(", "));
        kv(&mut out, "values", join(s.spec.values.iter().map(|&v| fmt_f64(v)).collect()));
        kv(&mut out, "seeds", join(s.spec.seeds.iter().map(u64::to_string).collect()));
        kv(&mut out, "methods", join(s.spec.methods.iter().map(|m| m.as_str().to_string()).collect()));
    }
    out
}

// ---------------------------------------------------------------------------
// topology files

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub channel: UserChannel,
    /// Overrides the rate box derived from the radio and power settings.
    pub rate_bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyFile {
    pub topology: Topology,
    pub users: Vec<UserRecord>,
}

pub fn load_topology_file(path: &Path, radio: &RadioConfig, default_budget_w: f64) -> Result<TopologyFile, ConfigError> {
    parse_topology_str(&read_file(path)?, radio, default_budget_w)
}

/// Parses `[node]`, `[link]` and `[user]` records. Link capacity and power
/// cap default to the radio model; node budgets to `default_budget_w`.
pub fn parse_topology_str(text: &str, radio: &RadioConfig, default_budget_w: f64) -> Result<TopologyFile, ConfigError> {
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut users = Vec::new();
    for section in parse_document(text)? {
        let (line, name) = (section.line, section.name.clone());
        let mut r = Reader::new(section);
        match name.as_str() {
            "node" => {
                let id = r.opt_usize("id")?.unwrap_or(nodes.len());
                let kind = r.choice(
                    "kind",
                    if id == 0 { NodeKind::Macro } else { NodeKind::Small },
                    |s| match s {
                        "macro" => Some(NodeKind::Macro),
                        "small" => Some(NodeKind::Small),
                        _ => None,
                    },
                    "macro, small",
                )?;
                nodes.push(Node {
                    id,
                    kind,
                    cluster_id: r.opt_usize("cluster")?,
                    is_cluster_head: r.opt_bool("head")?.unwrap_or(false),
                    max_power_watts: r.f64("max_power_w", default_budget_w)?,
                });
            }
            "link" => {
                let id = r.opt_usize("id")?.unwrap_or(links.len() + 1);
                let from = r.opt_usize("from")?.ok_or_else(|| parse_error(line, 1, "link needs `from`"))?;
                let to = r.opt_usize("to")?.ok_or_else(|| parse_error(line, 1, "link needs `to`"))?;
                let band = r.choice("band", Band::Vband, Band::parse, "e, v")?;
                let distance_km = r.f64("distance_km", 0.1)?;
                let capacity = r.opt_f64("capacity_bps")?;
                let power = r.opt_f64("max_power_w")?;
                positive(&format!("link.{id}.distance_km"), distance_km)?;
                let mut link = Link::from_radio(id, from, to, band, distance_km, radio, capacity)
                    .map_err(|e| invalid(format!("link.{id}"), e.to_string()))?;
                if let Some(p) = power {
                    link.max_power_watts = p;
                }
                links.push(link);
            }
            "user" => {
                let id = r.opt_usize("id")?.unwrap_or(users.len());
                let bs = r.opt_usize("bs")?.ok_or_else(|| parse_error(line, 1, "user needs `bs`"))?;
                let gain_sq = match (r.opt_f64("gain_sq")?, r.opt_f64("gain_db")?) {
                    (Some(g), None) => g,
                    (None, Some(db)) => crate::radio::db_to_linear(db),
                    (Some(_), Some(_)) => return Err(invalid(format!("user.{id}"), "give gain_sq or gain_db, not both")),
                    (None, None) => return Err(invalid(format!("user.{id}"), "needs gain_sq or gain_db")),
                };
                positive(&format!("user.{id}.gain_sq"), gain_sq)?;
                let class = r.u64("class", 0)?;
                let lo = r.opt_f64("y_min_bps")?;
                let hi = r.opt_f64("y_max_bps")?;
                let rate_bounds = match (lo, hi) {
                    (None, None) => None,
                    (Some(lo), Some(hi)) if lo <= hi && lo >= 0.0 => Some((lo, hi)),
                    (Some(_), Some(_)) => {
                        return Err(invalid(format!("user.{id}.y_min_bps/user.{id}.y_max_bps"), "y_min_bps exceeds y_max_bps"))
                    }
                    _ => return Err(invalid(format!("user.{id}"), "give both y_min_bps and y_max_bps")),
                };
                users.push(UserRecord {
                    channel: UserChannel {
                        user_id: id,
                        attached_bs: bs,
                        gain_sq,
                        demand_class: u32::try_from(class).map_err(|_| invalid(format!("user.{id}.class"), "too large"))?,
                    },
                    rate_bounds,
                });
            }
            other => return Err(parse_error(line, 2, format!("unknown record [{other}] (node, link, user)"))),
        }
        r.finish()?;
    }
    let topology = build_incidence(nodes, links).map_err(|e| invalid("topology", e.to_string()))?;
    Ok(TopologyFile { topology, users })
}

pub fn serialize_topology(topology: &Topology, users: &[UserRecord]) -> String {
    let mut out = String::new();
    for n in topology.nodes() {
        let _ = writeln!(out, "[node]\nid = {}", n.id);
        let _ = writeln!(out, "kind = {}", if n.kind == NodeKind::Macro { "macro" } else { "small" });
        if let Some(c) = n.cluster_id {
            let _ = writeln!(out, "cluster = {c}");
        }
        let _ = writeln!(out, "head = {}", n.is_cluster_head);
        let _ = writeln!(out, "max_power_w = {}\n", fmt_f64(n.max_power_watts));
    }
    for l in topology.links() {
        let _ = writeln!(out, "[link]\nid = {}\nfrom = {}\nto = {}\nband = {}", l.id, l.from, l.to, l.band);
        let _ = writeln!(out, "distance_km = {}", fmt_f64(l.distance_km));
        let _ = writeln!(out, "capacity_bps = {}", fmt_f64(l.capacity_bps));
        let _ = writeln!(out, "max_power_w = {}\n", fmt_f64(l.max_power_watts));
    }
    for u in users {
        let c = &u.channel;
        let _ = writeln!(out, "[user]\nid = {}\nbs = {}\ngain_sq = {}", c.user_id, c.attached_bs, fmt_f64(c.gain_sq));
        let _ = writeln!(out, "class = {}", c.demand_class);
        if let Some((lo, hi)) = u.rate_bounds {
            let _ = writeln!(out, "y_min_bps = {}\ny_max_bps = {}", fmt_f64(lo), fmt_f64(hi));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config_str(text, None)
    }

    #[test]
    fn minimal_file_has_table_one_defaults() {
        let cfg = parse("[run]\nseed = 3\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.power.bs_max_power_dbm, 43.0);
        assert_eq!(cfg.optimizer.upper_iteration_bound, 2000);
        assert_eq!(cfg, RunConfig { seed: 3, ..RunConfig::default() });
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rate_box_order_is_validated() {
        match parse("[radio]\ny_min_bps = 5e6\ny_max_bps = 1e6\n") {
            Err(ConfigError::Validation { field, .. }) => {
                assert!(field.contains("y_min_bps") && field.contains("y_max_bps"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        match parse("[radio]\ny_min_bps = 1e6\n  foo = 2\n") {
            Err(ConfigError::Parse { line, col, msg }) => {
                assert_eq!((line, col), (3, 3));
                assert!(msg.contains("`foo`"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("seed = 1\n", 1, 1),
            ("[run]\nseed = abc\n", 2, 8),
            ("[run]\nseed\n", 2, 1),
            ("[nope]\n", 1, 2),
            ("[run]\n[run]\n", 2, 2),
            ("[run]\nseed = 1\nseed = 2\n", 3, 1),
            ("[sweep]\naxis = snr_db\nvalues = [1, 2\n", 3, 10),
            ("[topology]\nshape = ring\n", 2, 9),
        ];
        for (text, line, col) in cases {
            match parse(text) {
                Err(ConfigError::Parse { line: l, col: c, .. }) => assert_eq!((l, c), (line, col), "{text:?}"),
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn missing_topology_file() {
        let err = parse("[topology]\nsource = file\nfile = \"/definitely/not/here.txt\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile { .. }));
        assert!(matches!(parse_config(Path::new("/no/such/config.cfg")), Err(ConfigError::MissingFile { .. })));
    }

    #[test]
    fn full_roundtrip() {
        let text = "[run]\nseed = 9\nout_dir = \"out dir\"\n[users]\ntotal_users = 7\ntarget_snr_db = none\n\
                    [queue]\nname = a\nchannels = 3\n[queue]\nlambda_r_per_s = 0.25\n\
                    [sweep]\naxis = backhaul\nvalues = [0.1, 0.5, 1]\nseeds = [1, 2]\nmethods = [optimized]\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.queues[1].name, "q2");
        assert_eq!(cfg.users.target_snr_db, None);
        let again = parse(&serialize_config(&cfg)).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(serialize_config(&again), serialize_config(&cfg));
    }

    #[test]
    fn topology_file_roundtrip() {
        let radio = RadioConfig::default();
        let text = "[node]\nid = 0\n[node]\nid = 1\nmax_power_w = 3\n\
                    [link]\nfrom = 0\nto = 1\nband = e\ndistance_km = 0.2\n\
                    [user]\nbs = 1\ngain_db = -100\ny_min_bps = 1e6\ny_max_bps = 2e6\n";
        let file = parse_topology_str(text, &radio, 10.0).unwrap();
        assert_eq!(file.topology.nodes()[1].max_power_watts, 3.0);
        assert_eq!(file.topology.links()[0].capacity_bps, radio.link_capacity_at_max_power(Band::Eband, 0.2).unwrap());
        let again = parse_topology_str(&serialize_topology(&file.topology, &file.users), &radio, 10.0).unwrap();
        assert_eq!(again, file);
        assert!(parse_topology_str("[link]\nfrom = 0\nto = 5\n", &radio, 1.0).is_err());
    }
}

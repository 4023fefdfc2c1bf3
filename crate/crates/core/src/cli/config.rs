//! Experiment configuration: sectioned `key = value` text (TOML), unknown
//! keys rejected, dotted `--set section.key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificates::validate_gain_row;
use crate::double_integrator::{BoxLimits, CurvatureBound, DoubleIntegratorSetup, RateSigning};
use crate::simulator::{Mode, SimConfig};
use crate::system::StateVector;
use crate::trigger::{RootMethod, TriggerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub name: String,
    pub x0: [f64; 2],
    pub x1_d: f64,
    pub x2_d: f64,
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub k_b: [f64; 2],
    pub k: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub rate_signing: RateSigning,
    pub curvature_bound: CurvatureBound,
}

impl Default for PlantSection {
    fn default() -> Self {
        let s = DoubleIntegratorSetup::default();
        Self {
            name: "double_integrator".to_string(),
            x0: s.x0,
            x1_d: s.target[0],
            x2_d: s.target[1],
            x1_min: s.limits.x1_min,
            x1_max: s.limits.x1_max,
            x2_min: s.limits.x2_min,
            x2_max: s.limits.x2_max,
            epsilon: s.epsilon,
            lipschitz: s.lipschitz,
            k_b: s.k_b,
            k: s.k,
            u_min: s.u_min,
            u_max: s.u_max,
            rate_signing: s.signing,
            curvature_bound: s.curvature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[default]
    SelfTriggered,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub mode: SimMode,
    pub t_p: f64,
    pub dt_int: f64,
    pub t_end: f64,
    pub goal_radius: f64,
    pub relax_clf: bool,
    pub clf_penalty: f64,
    pub log_every: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            mode: SimMode::SelfTriggered,
            t_p: 0.75,
            dt_int: 2.5e-5,
            t_end: 20.0,
            goal_radius: 1e-2,
            relax_clf: false,
            clf_penalty: crate::qp::DEFAULT_CLF_PENALTY,
            log_every: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerSection {
    pub tau_min: f64,
    pub tau_max: f64,
    pub root_tol: f64,
    pub root_method: RootMethod,
}

impl Default for TriggerSection {
    fn default() -> Self {
        let t = TriggerConfig::default();
        Self {
            tau_min: t.tau_min,
            tau_max: t.tau_max,
            root_tol: t.root_tol,
            root_method: t.root_method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub seed: u64,
    pub lipschitz_samples: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            seed: 0,
            lipschitz_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub sim: SimSection,
    pub trigger: TriggerSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A parsed config together with the text it came from, for diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    source: String,
    origin: String,
    overridden: Vec<String>,
}

impl LoadedConfig {
    /// Where `section.key` was set: a file line, `--set`, or the default.
    pub fn locate(&self, section: &str, key: &str) -> String {
        let dotted = format!("{section}.{key}");
        if self.overridden.contains(&dotted) {
            return "--set".to_string();
        }
        match find_key_line(&self.source, section, key) {
            Some(line) => format!("{}:{line}", self.origin),
            None => "default".to_string(),
        }
    }

    /// Full semantic validation; the error names the key and where it was set.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some((section, key, msg)) = self.config.first_violation() {
            return Err(ConfigError(format!(
                "{section}.{key} ({}): {msg}",
                self.locate(section, key)
            )));
        }
        Ok(())
    }
}

/// 1-based line of `key = …` inside `[section]`.
fn find_key_line(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if current == section && rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
        // dotted form at top level
        if current.is_empty() {
            if let Some(rest) = line.strip_prefix(&format!("{section}.{key}")) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got `{raw}`")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_string()).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(format!("--set has an empty key segment in `{raw}`")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(
    table: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cursor = table;
    for p in parents {
        let entry = cursor
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("--set: `{p}` is not a section")))?;
    }
    cursor.insert(last.clone(), value);
    Ok(())
}

/// Parses `text` (named `origin` in diagnostics) and applies `overrides`.
/// Semantic validation is left to [`LoadedConfig::validate`].
pub fn parse(text: &str, origin: &str, overrides: &[String]) -> Result<LoadedConfig, ConfigError> {
    // parse once as the typed struct so syntax, type and unknown-key errors carry a line
    toml::from_str::<ExperimentConfig>(text).map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| ConfigError(format!("{origin}: {e}")))?;
    let mut overridden = Vec::new();
    for raw in overrides {
        let (path, value) = parse_override(raw)?;
        apply_override(&mut table, &path, value)?;
        overridden.push(path.join("."));
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(format!("--set: {e}")))?;
    Ok(LoadedConfig {
        config,
        source: text.to_string(),
        origin: origin.to_string(),
        overridden,
    })
}

/// Reads and validates a config file (or the defaults when `path` is `None`).
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<LoadedConfig, ConfigError> {
    let (text, origin) = match path {
        Some(p) => (
            std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    let loaded = parse(&text, &origin, overrides)?;
    loaded.validate()?;
    Ok(loaded)
}

impl ExperimentConfig {
    /// First violated constraint as `(section, key, message)`.
    pub fn first_violation(&self) -> Option<(&'static str, &'static str, String)> {
        let p = &self.plant;
        let s = &self.sim;
        let t = &self.trigger;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let checks: Vec<(bool, &'static str, &'static str, String)> = vec![
            (
                p.name == "double_integrator",
                "plant",
                "name",
                format!("unknown plant `{}` (available: double_integrator)", p.name),
            ),
            (positive(p.epsilon), "plant", "epsilon", format!("epsilon must be positive, got {}", p.epsilon)),
            (
                positive(p.lipschitz),
                "plant",
                "lipschitz",
                format!("lipschitz must be positive, got {}", p.lipschitz),
            ),
            (
                p.x1_min < p.x1_max,
                "plant",
                "x1_max",
                format!("x1_min must be below x1_max, got [{}, {}]", p.x1_min, p.x1_max),
            ),
            (
                p.x2_min < p.x2_max,
                "plant",
                "x2_max",
                format!("x2_min must be below x2_max, got [{}, {}]", p.x2_min, p.x2_max),
            ),
            (
                p.u_min <= p.u_max,
                "plant",
                "u_max",
                format!("u_min must not exceed u_max, got [{}, {}]", p.u_min, p.u_max),
            ),
            (
                p.x0[0] > p.x1_min && p.x0[0] < p.x1_max && p.x0[1] > p.x2_min && p.x0[1] < p.x2_max,
                "plant",
                "x0",
                format!("x0 = {:?} must lie strictly inside the box", p.x0),
            ),
            (positive(p.k), "plant", "k", format!("k must be positive, got {}", p.k)),
            (
                validate_gain_row(&p.k_b),
                "plant",
                "k_b",
                format!("k_b = {:?} is not a stabilizing gain row (need both entries positive)", p.k_b),
            ),
            (positive(s.t_p), "sim", "t_p", format!("t_p must be positive, got {}", s.t_p)),
            (positive(s.dt_int), "sim", "dt_int", format!("dt_int must be positive, got {}", s.dt_int)),
            (positive(s.t_end), "sim", "t_end", format!("t_end must be positive, got {}", s.t_end)),
            (
                positive(s.goal_radius),
                "sim",
                "goal_radius",
                format!("goal_radius must be positive, got {}", s.goal_radius),
            ),
            (
                positive(s.clf_penalty),
                "sim",
                "clf_penalty",
                format!("clf_penalty must be positive, got {}", s.clf_penalty),
            ),
            (s.log_every >= 1, "sim", "log_every", "log_every must be at least 1".to_string()),
            (positive(t.tau_min), "trigger", "tau_min", format!("tau_min must be positive, got {}", t.tau_min)),
            (
                t.tau_max > t.tau_min && t.tau_max.is_finite(),
                "trigger",
                "tau_max",
                format!("tau_max must exceed tau_min, got {} <= {}", t.tau_max, t.tau_min),
            ),
            (positive(t.root_tol), "trigger", "root_tol", format!("root_tol must be positive, got {}", t.root_tol)),
            (
                s.mode != SimMode::SelfTriggered || s.dt_int <= t.tau_min / 4.0,
                "sim",
                "dt_int",
                format!("dt_int = {} must not exceed tau_min / 4 = {}", s.dt_int, t.tau_min / 4.0),
            ),
            (
                s.mode != SimMode::Periodic || s.dt_int <= s.t_p / 10.0,
                "sim",
                "dt_int",
                format!("dt_int = {} must not exceed t_p / 10 = {}", s.dt_int, s.t_p / 10.0),
            ),
        ];
        checks
            .into_iter()
            .find(|(ok, ..)| !ok)
            .map(|(_, section, key, msg)| (section, key, msg))
    }

    pub fn setup(&self) -> DoubleIntegratorSetup {
        let p = &self.plant;
        DoubleIntegratorSetup {
            x0: p.x0,
            target: [p.x1_d, p.x2_d],
            limits: BoxLimits {
                x1_min: p.x1_min,
                x1_max: p.x1_max,
                x2_min: p.x2_min,
                x2_max: p.x2_max,
            },
            epsilon: p.epsilon,
            lipschitz: p.lipschitz,
            k_b: p.k_b,
            k: p.k,
            u_min: p.u_min,
            u_max: p.u_max,
            signing: p.rate_signing,
            curvature: p.curvature_bound,
        }
    }

    pub fn trigger_config(&self) -> TriggerConfig {
        TriggerConfig {
            tau_min: self.trigger.tau_min,
            tau_max: self.trigger.tau_max,
            root_tol: self.trigger.root_tol,
            root_method: self.trigger.root_method,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            x0: StateVector {
                time: 0.0,
                entries: self.setup().x0(),
            },
            goal_radius: s.goal_radius,
            t_end: s.t_end,
            dt_int: s.dt_int,
            mode: match s.mode {
                SimMode::SelfTriggered => Mode::SelfTriggered,
                SimMode::Periodic => Mode::Periodic { t_p: s.t_p },
            },
            trigger: self.trigger_config(),
            clf_penalty: s.relax_clf.then_some(s.clf_penalty),
            log_every: s.log_every,
        }
    }

    /// The resolved config as config-file text.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

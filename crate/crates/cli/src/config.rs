//! Experiment configuration: a flat TOML file merged with command-line
//! overrides, resolved into per-command parameter structs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use dmtlab_core::{Deadline, PowerMode, SchemeConfig, StageThresholdMode};

/// Library/config-level failure split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage; exit code 2.
    Config(String),
    /// Numerical or simulation abort diagnostics; exit code 3.
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical diagnostic: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dmtlab_core::Error> for CliError {
    fn from(err: dmtlab_core::Error) -> Self {
        use dmtlab_core::Error::*;
        match err {
            InvalidConfig(_) | Precondition(_) => CliError::Config(err.to_string()),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Deadline as written in a config file: an integer or "unbounded".
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum DeadlineField {
    Intervals(u32),
    Keyword(DeadlineKeyword),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadlineKeyword {
    Unbounded,
}

/// The flat key-value experiment file. Every key is optional; commands
/// fill in their own defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub l: Option<u32>,
    pub deadline: Option<DeadlineField>,
    pub deadlines: Option<Vec<u32>>,
    pub r: Option<f64>,
    pub r_grid: Option<Vec<f64>>,
    pub r_steps: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub power_mode: Option<String>,
    pub schedule: Option<String>,
    pub out: Option<String>,
    pub d_max: Option<u32>,
    pub stage_cap: Option<u32>,
    pub budget_multiplier: Option<f64>,
    pub calibration_trials: Option<u64>,
    pub variants: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))
            }
        }
    }
}

/// Printed-form variant switches; all off means canonical behavior.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VariantFlags {
    pub printed_alpha: bool,
    pub printed_exmp2: bool,
    pub printed_f_i: bool,
}

impl VariantFlags {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> CliResult<Self> {
        let mut flags = Self::default();
        for name in names {
            match name.as_ref() {
                "printed_alpha" => flags.printed_alpha = true,
                "printed_exmp2" => flags.printed_exmp2 = true,
                "printed_f_i" => flags.printed_f_i = true,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown variant '{other}' (expected printed_alpha, printed_exmp2 or printed_f_i)"
                    )))
                }
            }
        }
        Ok(flags)
    }

    pub fn describe(&self) -> String {
        let mut names = Vec::new();
        if self.printed_alpha {
            names.push("printed_alpha");
        }
        if self.printed_exmp2 {
            names.push("printed_exmp2");
        }
        if self.printed_f_i {
            names.push("printed_f_i");
        }
        if names.is_empty() {
            "none (canonical)".to_string()
        } else {
            names.join(",")
        }
    }

    pub fn threshold_mode(&self) -> StageThresholdMode {
        if self.printed_f_i {
            StageThresholdMode::Printed
        } else {
            StageThresholdMode::Canonical
        }
    }
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub snr_db_list: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub variants: Vec<String>,
    pub schedule: Option<String>,
}

fn parse_power_mode(name: &str) -> CliResult<PowerMode> {
    match name {
        "short_term" => Ok(PowerMode::ShortTerm),
        "long_term_printed" => Ok(PowerMode::LongTermPrinted),
        "long_term_exponent" => Ok(PowerMode::LongTermExponent),
        other => Err(CliError::Config(format!(
            "unknown power_mode '{other}' (expected short_term, long_term_printed or long_term_exponent)"
        ))),
    }
}

fn apply_schedule(mode: PowerMode, schedule: Option<&str>) -> CliResult<PowerMode> {
    match schedule {
        None => Ok(mode),
        Some(name) => {
            let flavor = match name {
                "printed" => PowerMode::LongTermPrinted,
                "exponent" => PowerMode::LongTermExponent,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown schedule '{other}' (expected printed or exponent)"
                    )))
                }
            };
            match mode {
                PowerMode::ShortTerm => Err(CliError::Config(
                    "--schedule applies only to long-term power modes".into(),
                )),
                _ => Ok(flavor),
            }
        }
    }
}

fn ensure_sorted(name: &str, values: &[f64]) -> CliResult<()> {
    if values.is_empty() {
        return Err(CliError::Config(format!("{name} must be non-empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!(
            "{name} must contain finite values"
        )));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

/// Resolved parameters for the analytic curve table.
#[derive(Debug, Clone)]
pub struct CurveParams {
    pub m: usize,
    pub n: usize,
    pub l: u32,
    pub deadlines: Vec<u32>,
    pub r_grid: Vec<f64>,
    pub variants: VariantFlags,
    pub out: Option<PathBuf>,
}

impl CurveParams {
    pub fn resolve(file: &FileConfig, overrides: &Overrides) -> CliResult<Self> {
        Self::resolve_with_defaults(file, overrides, 2, 2, 8, &[1, 2, 4, 8])
    }

    /// Defaults preset for the bounded-deadline tradeoff figure.
    pub fn resolve_figure2(file: &FileConfig, overrides: &Overrides) -> CliResult<Self> {
        Self::resolve_with_defaults(file, overrides, 2, 2, 8, &[1, 2, 3, 4, 8])
    }

    fn resolve_with_defaults(
        file: &FileConfig,
        overrides: &Overrides,
        m: usize,
        n: usize,
        l: u32,
        deadlines: &[u32],
    ) -> CliResult<Self> {
        let m = file.m.unwrap_or(m);
        let n = file.n.unwrap_or(n);
        let l = file.l.unwrap_or(l);
        let deadlines = file.deadlines.clone().unwrap_or_else(|| deadlines.to_vec());
        if deadlines.is_empty() || deadlines.contains(&0) {
            return Err(CliError::Config(
                "deadlines must be non-empty positive integers".into(),
            ));
        }
        if deadlines.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(
                "deadlines must be strictly increasing".into(),
            ));
        }
        let min_mn = m.min(n) as f64;
        let r_grid = match &file.r_grid {
            Some(grid) => {
                ensure_sorted("r_grid", grid)?;
                if grid.first().copied().unwrap_or(-1.0) < 0.0
                    || grid.last().copied().unwrap_or(f64::MAX) > min_mn
                {
                    return Err(CliError::Config(format!(
                        "r_grid must lie within [0, {min_mn}]"
                    )));
                }
                grid.clone()
            }
            None => {
                let steps = file.r_steps.unwrap_or(41).max(2);
                (0..steps)
                    .map(|i| min_mn * i as f64 / (steps - 1) as f64)
                    .collect()
            }
        };
        let mut variant_names = file.variants.clone().unwrap_or_default();
        variant_names.extend(overrides.variants.iter().cloned());
        Ok(Self {
            m,
            n,
            l,
            deadlines,
            r_grid,
            variants: VariantFlags::from_names(&variant_names)?,
            out: overrides
                .out
                .clone()
                .or_else(|| file.out.clone().map(PathBuf::from)),
        })
    }
}

/// Resolved parameters for the delay-ratio table.
#[derive(Debug, Clone)]
pub struct Figure3Params {
    pub m: usize,
    pub n: usize,
    pub l: u32,
    pub d_max: u32,
    pub variants: VariantFlags,
    pub out: Option<PathBuf>,
}

impl Figure3Params {
    pub fn resolve(file: &FileConfig, overrides: &Overrides) -> CliResult<Self> {
        let m = file.m.unwrap_or(3);
        let n = file.n.unwrap_or(1);
        let l = file.l.unwrap_or(10);
        let d_max = file.d_max.unwrap_or(10);
        if n != 1 {
            return Err(CliError::Config(
                "the delay-ratio table is defined for single-receive-antenna links (n = 1)".into(),
            ));
        }
        if d_max == 0 {
            return Err(CliError::Config("d_max must be >= 1".into()));
        }
        let mut variant_names = file.variants.clone().unwrap_or_default();
        variant_names.extend(overrides.variants.iter().cloned());
        Ok(Self {
            m,
            n,
            l,
            d_max,
            variants: VariantFlags::from_names(&variant_names)?,
            out: overrides
                .out
                .clone()
                .or_else(|| file.out.clone().map(PathBuf::from)),
        })
    }
}

/// Resolved parameters shared by the sweep and audit commands.
#[derive(Debug, Clone)]
pub struct SweepParams {
    pub m: usize,
    pub n: usize,
    pub scheme: SchemeConfig,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub calibration_trials: u64,
    pub budget_multiplier: f64,
    pub variants: VariantFlags,
    pub out: Option<PathBuf>,
}

impl SweepParams {
    pub fn resolve(file: &FileConfig, overrides: &Overrides) -> CliResult<Self> {
        let m = file.m.unwrap_or(1);
        let n = file.n.unwrap_or(1);
        let l = file.l.unwrap_or(4);
        let deadline = match file.deadline {
            None => Deadline::Bounded(1),
            Some(DeadlineField::Intervals(0)) => {
                return Err(CliError::Config("deadline must be >= 1".into()))
            }
            Some(DeadlineField::Intervals(d)) => Deadline::Bounded(d),
            Some(DeadlineField::Keyword(DeadlineKeyword::Unbounded)) => Deadline::Unbounded,
        };
        let r = file.r.unwrap_or(0.25);
        let power_mode = parse_power_mode(file.power_mode.as_deref().unwrap_or("short_term"))?;
        let schedule = overrides.schedule.as_deref().or(file.schedule.as_deref());
        let power_mode = apply_schedule(power_mode, schedule)?;
        let mut scheme = SchemeConfig::new(l, deadline, r, power_mode)?;
        if let Some(cap) = file.stage_cap {
            if cap == 0 {
                return Err(CliError::Config("stage_cap must be >= 1".into()));
            }
            scheme.stage_cap = cap;
        }
        let snr_db = overrides
            .snr_db_list
            .clone()
            .or_else(|| file.snr_db.clone())
            .unwrap_or_else(|| vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        ensure_sorted("snr_db", &snr_db)?;
        let trials = overrides.trials.or(file.trials).unwrap_or(10_000);
        if trials == 0 {
            return Err(CliError::Config("trials must be >= 1".into()));
        }
        let mut variant_names = file.variants.clone().unwrap_or_default();
        variant_names.extend(overrides.variants.iter().cloned());
        Ok(Self {
            m,
            n,
            scheme,
            snr_db,
            trials,
            seed: overrides.seed.or(file.seed).unwrap_or(0),
            calibration_trials: file.calibration_trials.unwrap_or(200_000),
            budget_multiplier: file.budget_multiplier.unwrap_or(2.0),
            variants: VariantFlags::from_names(&variant_names)?,
            out: overrides
                .out
                .clone()
                .or_else(|| file.out.clone().map(PathBuf::from)),
        })
    }
}

//! Typed tracker configuration: defaults, flat key=value parsing with strict
//! validation, and the ablation variant wiring.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::regularization::{LogBase, RegParams};

/// Which regularization branches are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fixed spatial weights and fixed temporal penalty (baseline).
    Strcf,
    /// Variation-driven spatial weights only.
    Asr,
    /// Adaptive temporal reference and joint theta optimization only.
    Atr,
    /// Both branches active.
    AutoTrack,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "strcf" => Some(Variant::Strcf),
            "asr" => Some(Variant::Asr),
            "atr" => Some(Variant::Atr),
            "autotrack" => Some(Variant::AutoTrack),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Strcf => "strcf",
            Variant::Asr => "asr",
            Variant::Atr => "atr",
            Variant::AutoTrack => "autotrack",
        }
    }

    /// Spatial branch: variation-adapted weights.
    pub fn uses_asr(&self) -> bool {
        matches!(self, Variant::Asr | Variant::AutoTrack)
    }

    /// Temporal branch: adaptive reference, theta subproblem, learn gate.
    pub fn uses_atr(&self) -> bool {
        matches!(self, Variant::Atr | Variant::AutoTrack)
    }
}

/// Behavior when the global variation exceeds its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CeaseMode {
    /// Skip the frame's training entirely, carrying the filter over.
    Skip,
    /// Train with an effectively infinite temporal penalty.
    Penalize,
}

/// Full tracker configuration. Defaults follow the published operating point:
/// delta 0.2, nu 2e-5, zeta 13, phi 3000, four solver iterations, and the
/// 1/10/10000 step-size schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrackerConfig {
    pub variant: Variant,
    pub delta: f64,
    pub nu: f64,
    pub zeta: f64,
    pub phi: f64,
    pub admm_iters: usize,
    pub gamma0: f64,
    pub beta: f64,
    pub gamma_max: f64,
    /// Temporal penalty used when the theta subproblem is disabled.
    pub fixed_theta: f64,
    pub cell_size: usize,
    /// Search-area to object-area ratio.
    pub padding: f64,
    pub model_max_side: usize,
    pub scales: usize,
    pub scale_step: f64,
    pub scale_damping: f64,
    pub u_min: f64,
    pub u_slope: f64,
    pub log_base: LogBase,
    pub cease_mode: CeaseMode,
    pub use_color_names: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            variant: Variant::AutoTrack,
            delta: 0.2,
            nu: 2e-5,
            zeta: 13.0,
            phi: 3000.0,
            admm_iters: 4,
            gamma0: 1.0,
            beta: 10.0,
            gamma_max: 10000.0,
            fixed_theta: 15.0,
            cell_size: 4,
            padding: 4.0,
            model_max_side: 200,
            scales: 5,
            scale_step: 1.01,
            scale_damping: 0.99,
            u_min: 0.1,
            u_slope: 3.0,
            log_base: LogBase::Natural,
            cease_mode: CeaseMode::Skip,
            use_color_names: false,
        }
    }
}

impl TrackerConfig {
    /// Apply an ablation variant: the baseline and the spatial-only variant
    /// run with the fixed temporal penalty and no learn gate; variants without
    /// the spatial branch run with delta forced to zero.
    pub fn configure_variant(mut self, variant: Variant) -> TrackerConfig {
        self.variant = variant;
        if !variant.uses_asr() {
            self.delta = 0.0;
        }
        self
    }

    pub fn reg_params(&self) -> RegParams {
        RegParams {
            delta: if self.variant.uses_asr() { self.delta } else { 0.0 },
            nu: self.nu,
            zeta: self.zeta,
            phi: self.phi,
            u_min: self.u_min,
            u_slope: self.u_slope,
            log_base: self.log_base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::ConfigInvalid {
                    key: key.to_string(),
                    reason: reason.to_string(),
                })
            }
        }
        check(self.delta >= 0.0, "delta", "must be >= 0")?;
        check(self.nu >= 0.0, "nu", "must be >= 0")?;
        check(self.zeta > 0.0, "zeta", "must be > 0")?;
        check(self.phi > 0.0, "phi", "must be > 0")?;
        check(self.admm_iters >= 1, "admm_iters", "must be >= 1")?;
        check(self.gamma0 > 0.0, "gamma0", "must be > 0")?;
        check(self.beta >= 1.0, "beta", "must be >= 1")?;
        check(self.gamma_max >= self.gamma0, "gamma_max", "must be >= gamma0")?;
        check(self.fixed_theta >= 0.0, "fixed_theta", "must be >= 0")?;
        check(self.cell_size >= 1, "cell_size", "must be >= 1")?;
        check(self.padding > 1.0, "padding", "must be > 1")?;
        check(
            self.model_max_side >= 4 * self.cell_size,
            "model_max_side",
            "must cover at least four cells",
        )?;
        check(self.scales >= 1 && self.scales % 2 == 1, "scales", "must be odd and >= 1")?;
        check(self.scale_step >= 1.0, "scale_step", "must be >= 1")?;
        check(
            self.scale_damping > 0.0 && self.scale_damping <= 1.0,
            "scale_damping",
            "must be in (0, 1]",
        )?;
        check(self.u_min >= 0.0, "u_min", "must be >= 0")?;
        check(self.u_slope >= 0.0, "u_slope", "must be >= 0")?;
        Ok(())
    }

    /// Parse flat `key=value` text. Blank lines and `#` comments are skipped;
    /// unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<TrackerConfig> {
        let mut cfg = TrackerConfig::default();
        let mut explicit_variant = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigInvalid {
                key: format!("line {}", lineno + 1),
                reason: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: &str| Error::ConfigInvalid {
                key: key.to_string(),
                reason: reason.to_string(),
            };
            let parse_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad("not a number"));
            let parse_usize = |v: &str| v.parse::<usize>().map_err(|_| bad("not a count"));
            match key {
                "variant" => {
                    explicit_variant =
                        Some(Variant::parse(value).ok_or_else(|| bad("unknown variant"))?)
                }
                "delta" => cfg.delta = parse_f64(value)?,
                "nu" => cfg.nu = parse_f64(value)?,
                "zeta" => cfg.zeta = parse_f64(value)?,
                "phi" => cfg.phi = parse_f64(value)?,
                "admm_iters" => cfg.admm_iters = parse_usize(value)?,
                "gamma0" => cfg.gamma0 = parse_f64(value)?,
                "beta" => cfg.beta = parse_f64(value)?,
                "gamma_max" => cfg.gamma_max = parse_f64(value)?,
                "fixed_theta" => cfg.fixed_theta = parse_f64(value)?,
                "cell_size" => cfg.cell_size = parse_usize(value)?,
                "padding" => cfg.padding = parse_f64(value)?,
                "model_max_side" => cfg.model_max_side = parse_usize(value)?,
                "scales" => cfg.scales = parse_usize(value)?,
                "scale_step" => cfg.scale_step = parse_f64(value)?,
                "scale_damping" => cfg.scale_damping = parse_f64(value)?,
                "u_min" => cfg.u_min = parse_f64(value)?,
                "u_slope" => cfg.u_slope = parse_f64(value)?,
                "log_base" => {
                    cfg.log_base = match value {
                        "e" | "natural" => LogBase::Natural,
                        "10" | "ten" => LogBase::Ten,
                        _ => return Err(bad("expected e or 10")),
                    }
                }
                "cease_mode" => {
                    cfg.cease_mode = match value {
                        "skip" => CeaseMode::Skip,
                        "penalize" => CeaseMode::Penalize,
                        _ => return Err(bad("expected skip or penalize")),
                    }
                }
                "use_color_names" => {
                    cfg.use_color_names = match value {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        _ => return Err(bad("expected true or false")),
                    }
                }
                other => return Err(Error::ConfigUnknownKey(other.to_string())),
            }
        }
        if let Some(v) = explicit_variant {
            cfg = cfg.configure_variant(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<TrackerConfig> {
        TrackerConfig::from_text(&std::fs::read_to_string(path)?)
    }

    /// Serialize back to the flat key=value form; `from_text` on the output
    /// reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variant={}", self.variant.name());
        let _ = writeln!(out, "delta={}", self.delta);
        let _ = writeln!(out, "nu={}", self.nu);
        let _ = writeln!(out, "zeta={}", self.zeta);
        let _ = writeln!(out, "phi={}", self.phi);
        let _ = writeln!(out, "admm_iters={}", self.admm_iters);
        let _ = writeln!(out, "gamma0={}", self.gamma0);
        let _ = writeln!(out, "beta={}", self.beta);
        let _ = writeln!(out, "gamma_max={}", self.gamma_max);
        let _ = writeln!(out, "fixed_theta={}", self.fixed_theta);
        let _ = writeln!(out, "cell_size={}", self.cell_size);
        let _ = writeln!(out, "padding={}", self.padding);
        let _ = writeln!(out, "model_max_side={}", self.model_max_side);
        let _ = writeln!(out, "scales={}", self.scales);
        let _ = writeln!(out, "scale_step={}", self.scale_step);
        let _ = writeln!(out, "scale_damping={}", self.scale_damping);
        let _ = writeln!(out, "u_min={}", self.u_min);
        let _ = writeln!(out, "u_slope={}", self.u_slope);
        let _ = writeln!(
            out,
            "log_base={}",
            match self.log_base {
                LogBase::Natural => "e",
                LogBase::Ten => "10",
            }
        );
        let _ = writeln!(
            out,
            "cease_mode={}",
            match self.cease_mode {
                CeaseMode::Skip => "skip",
                CeaseMode::Penalize => "penalize",
            }
        );
        let _ = writeln!(out, "use_color_names={}", self.use_color_names);
        out
    }

    /// Key/value map embedded into reports so that runs are reproducible.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.to_text()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

/// Load a config file, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<TrackerConfig> {
    match path {
        Some(p) => TrackerConfig::from_file(p),
        None => Ok(TrackerConfig::default()),
    }
}

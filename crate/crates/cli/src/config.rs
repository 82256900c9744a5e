//! Run configuration: flat `key = value` files merged with command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bloch_core::{ExcitationKind, ExcitationSpectrum, Grid, Method, PhysicalScales, SolverOptions};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Usage(format!(
                "unknown format {other:?} (expected csv or json)"
            ))),
        }
    }
}

/// Every setting, each optional. Used both for config files and for flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub spec: Option<ExcitationKind>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gap: Option<f64>,
    pub ef_ratio: Option<f64>,
    pub grid_n: Option<usize>,
    pub grid_xmax: Option<f64>,
    pub method: Option<Method>,
    pub include_k1: Option<bool>,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub npoints: Option<usize>,
    pub log_spacing: Option<bool>,
    pub temp: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub tolerance: Option<f64>,
    pub allow_high_temperature: Option<bool>,
}

pub const KEYS: [&str; 18] = [
    "spec",
    "alpha",
    "beta",
    "gap",
    "ef_ratio",
    "grid_n",
    "grid_xmax",
    "method",
    "include_k1",
    "tmin",
    "tmax",
    "npoints",
    "log_spacing",
    "temp",
    "out",
    "format",
    "tolerance",
    "allow_high_temperature",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("invalid value {raw:?} for key '{key}'")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "invalid value {raw:?} for key '{key}' (expected true or false)"
        ))),
    }
}

impl PartialConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut c = PartialConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected 'key = value'", lineno + 1))
            })?;
            c.set(key.trim(), value.trim())?;
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "spec" => {
                self.spec = Some(
                    v.parse()
                        .map_err(|_| CliError::Usage(format!("unknown spec {v:?}")))?,
                )
            }
            "alpha" => self.alpha = Some(parse_value(key, v)?),
            "beta" => self.beta = Some(parse_value(key, v)?),
            "gap" => self.gap = Some(parse_value(key, v)?),
            "ef_ratio" => self.ef_ratio = Some(parse_value(key, v)?),
            "grid_n" => self.grid_n = Some(parse_value(key, v)?),
            "grid_xmax" => self.grid_xmax = Some(parse_value(key, v)?),
            "method" => {
                self.method = Some(v.parse().map_err(|e: bloch_core::Error| {
                    CliError::Usage(e.to_string())
                })?)
            }
            "include_k1" => self.include_k1 = Some(parse_bool(key, v)?),
            "tmin" => self.tmin = Some(parse_value(key, v)?),
            "tmax" => self.tmax = Some(parse_value(key, v)?),
            "npoints" => self.npoints = Some(parse_value(key, v)?),
            "log_spacing" => self.log_spacing = Some(parse_bool(key, v)?),
            "temp" => self.temp = Some(parse_value(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => self.format = Some(v.parse()?),
            "tolerance" => self.tolerance = Some(parse_value(key, v)?),
            "allow_high_temperature" => self.allow_high_temperature = Some(parse_bool(key, v)?),
            other => {
                return Err(CliError::Usage(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Values set in `over` win.
    pub fn merged(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            spec: over.spec.or(self.spec),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            gap: over.gap.or(self.gap),
            ef_ratio: over.ef_ratio.or(self.ef_ratio),
            grid_n: over.grid_n.or(self.grid_n),
            grid_xmax: over.grid_xmax.or(self.grid_xmax),
            method: over.method.or(self.method),
            include_k1: over.include_k1.or(self.include_k1),
            tmin: over.tmin.or(self.tmin),
            tmax: over.tmax.or(self.tmax),
            npoints: over.npoints.or(self.npoints),
            log_spacing: over.log_spacing.or(self.log_spacing),
            temp: over.temp.or(self.temp),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            tolerance: over.tolerance.or(self.tolerance),
            allow_high_temperature: over.allow_high_temperature.or(self.allow_high_temperature),
        }
    }
}

/// A complete, validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ExcitationKind,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gap: Option<f64>,
    pub ef_ratio: f64,
    pub grid_n: usize,
    pub grid_xmax: f64,
    pub method: Method,
    pub include_k1: bool,
    pub tmin: f64,
    pub tmax: f64,
    pub npoints: usize,
    pub log_spacing: bool,
    pub temp: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tolerance: Option<f64>,
    pub allow_high_temperature: bool,
}

impl RunConfig {
    pub const DEFAULT_EF_RATIO: f64 = 100.0;
    pub const DEFAULT_TMIN: f64 = 0.002;
    pub const DEFAULT_TMAX: f64 = 0.02;
    pub const DEFAULT_NPOINTS: usize = 8;
    pub const DEFAULT_TEMP: f64 = 0.01;

    /// Fills defaults and checks everything the engine will need.
    pub fn resolve(p: PartialConfig) -> Result<Self, CliError> {
        let spec = p
            .spec
            .ok_or_else(|| CliError::Usage("missing required key 'spec'".into()))?;
        let cfg = RunConfig {
            spec,
            alpha: p.alpha,
            beta: p.beta,
            gap: p.gap,
            ef_ratio: p.ef_ratio.unwrap_or(Self::DEFAULT_EF_RATIO),
            grid_n: p.grid_n.unwrap_or(Grid::DEFAULT_N),
            grid_xmax: p.grid_xmax.unwrap_or(Grid::DEFAULT_X_MAX),
            method: p.method.unwrap_or(Method::LeadingOrder),
            include_k1: p.include_k1.unwrap_or(true),
            tmin: p.tmin.unwrap_or(Self::DEFAULT_TMIN),
            tmax: p.tmax.unwrap_or(Self::DEFAULT_TMAX),
            npoints: p.npoints.unwrap_or(Self::DEFAULT_NPOINTS),
            log_spacing: p.log_spacing.unwrap_or(true),
            temp: p.temp.unwrap_or(Self::DEFAULT_TEMP),
            out: p.out,
            format: p.format.unwrap_or(Format::Csv),
            tolerance: p.tolerance,
            allow_high_temperature: p.allow_high_temperature.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.spectrum()?;
        self.grid()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Usage(format!("'{name}' must be positive, got {v}")))
            }
        };
        positive("tmin", self.tmin)?;
        positive("tmax", self.tmax)?;
        positive("temp", self.temp)?;
        if self.tmax < self.tmin {
            return Err(CliError::Usage(format!(
                "'tmax' ({}) is below 'tmin' ({})",
                self.tmax, self.tmin
            )));
        }
        if self.npoints == 0 {
            return Err(CliError::Usage("'npoints' must be at least 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::Usage(format!("'tolerance' must be non-negative, got {t}")));
            }
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<ExcitationSpectrum, CliError> {
        let scales = PhysicalScales::with_ef_ratio(self.ef_ratio).map_err(CliError::from_usage)?;
        let s = match self.spec {
            ExcitationKind::Phonon => ExcitationSpectrum::phonon(scales),
            ExcitationKind::Coulomb => ExcitationSpectrum::coulomb(scales),
            ExcitationKind::Magnon => {
                let gap = self.gap.ok_or_else(|| {
                    CliError::Usage("spec 'magnon' requires the key 'gap' (--gap)".into())
                })?;
                ExcitationSpectrum::magnon(gap, scales).map_err(CliError::from_usage)?
            }
            ExcitationKind::Custom => {
                let alpha = self.alpha.ok_or_else(|| {
                    CliError::Usage("spec 'custom' requires the key 'alpha' (--alpha)".into())
                })?;
                let beta = self.beta.ok_or_else(|| {
                    CliError::Usage("spec 'custom' requires the key 'beta' (--beta)".into())
                })?;
                ExcitationSpectrum::custom(alpha, beta, self.gap.unwrap_or(0.0), scales)
                    .map_err(CliError::from_usage)?
            }
        };
        Ok(s)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::build(self.grid_n, self.grid_xmax).map_err(CliError::from_usage)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            include_k1: self.include_k1,
            allow_high_temperature: self.allow_high_temperature,
            ..SolverOptions::default()
        }
    }

    /// Serializes every set key; `RunConfig::resolve(PartialConfig::parse_str(..))`
    /// gives back an identical config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("spec", self.spec.to_string());
        if let Some(a) = self.alpha {
            put("alpha", format!("{a:e}"));
        }
        if let Some(b) = self.beta {
            put("beta", format!("{b:e}"));
        }
        if let Some(g) = self.gap {
            put("gap", format!("{g:e}"));
        }
        put("ef_ratio", format!("{:e}", self.ef_ratio));
        put("grid_n", self.grid_n.to_string());
        put("grid_xmax", format!("{:e}", self.grid_xmax));
        put("method", self.method.to_string());
        put("include_k1", self.include_k1.to_string());
        put("tmin", format!("{:e}", self.tmin));
        put("tmax", format!("{:e}", self.tmax));
        put("npoints", self.npoints.to_string());
        put("log_spacing", self.log_spacing.to_string());
        put("temp", format!("{:e}", self.temp));
        if let Some(o) = &self.out {
            put("out", o.display().to_string());
        }
        put("format", self.format.as_str().to_string());
        if let Some(t) = self.tolerance {
            put("tolerance", format!("{t:e}"));
        }
        put("allow_high_temperature", self.allow_high_temperature.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let p = PartialConfig::parse_str("spec = phonon\n").unwrap();
        let c = RunConfig::resolve(p).unwrap();
        assert_eq!(c.ef_ratio, 100.0);
        assert_eq!(c.grid_n, 400);
        assert_eq!(c.grid_xmax, 40.0);
        assert_eq!(c.method, Method::LeadingOrder);
        assert!(c.include_k1 && c.log_spacing);
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = PartialConfig::parse_str("# run\n\nspec = coulomb  # preset\nnpoints=5\n").unwrap();
        assert_eq!(p.spec, Some(ExcitationKind::Coulomb));
        assert_eq!(p.npoints, Some(5));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = PartialConfig::parse_str("spec = phonon\nfoo_bar = 3\n").unwrap_err();
        assert!(err.to_string().contains("foo_bar"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_gap_is_named() {
        let p = PartialConfig::parse_str("spec = magnon").unwrap();
        let err = RunConfig::resolve(p).unwrap_err();
        assert!(err.to_string().contains("'gap'"), "{err}");
    }

    #[test]
    fn bad_values_rejected() {
        assert!(PartialConfig::parse_str("grid_n = many").is_err());
        assert!(PartialConfig::parse_str("method = newton").is_err());
        assert!(PartialConfig::parse_str("just words").is_err());
        let p = PartialConfig::parse_str("spec = phonon\ngrid_n = 7").unwrap();
        assert!(RunConfig::resolve(p).is_err());
        let p = PartialConfig::parse_str("spec = phonon\ntmin = 0.1\ntmax = 0.01").unwrap();
        assert!(RunConfig::resolve(p).is_err());
    }
}

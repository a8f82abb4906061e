//! Flat `key = value` settings. `#` starts a comment; later assignments win.

use std::path::Path;
use std::str::FromStr;

use boxprompt_core::cfpg::CfpgConfig;
use boxprompt_core::mbo::MboConfig;
use boxprompt_core::metrics::DEFAULT_THRESHOLDS;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub cfpg: CfpgConfig,
    pub mbo: MboConfig,
    pub thresholds: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            cfpg: CfpgConfig::default(),
            mbo: MboConfig::default(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::new(ErrorKind::Config, format!("cannot parse {key} = {value:?}")))
}

impl Settings {
    pub const KEYS: [&'static str; 23] = [
        "seed",
        "cfpg.seed",
        "cfpg.tau",
        "cfpg.min_area",
        "cfpg.area_fraction",
        "cfpg.morph_radius",
        "cfpg.kmeans_max_iter",
        "cfpg.kmeans_tol",
        "mbo.seed",
        "mbo.erosion_fraction",
        "mbo.band_factor",
        "mbo.components",
        "mbo.max_outer_iters",
        "mbo.epsilon",
        "mbo.gamma",
        "mbo.lambda",
        "mbo.beta",
        "mbo.gmm_max_iter",
        "mbo.gmm_tol",
        "mbo.reg_eps",
        "mbo.max_fit_pixels",
        "eval.thresholds",
        "eval.precision",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key.trim() {
            "seed" => {
                self.cfpg.seed = parse(key, v)?;
                self.mbo.seed = self.cfpg.seed;
            }
            "cfpg.seed" => self.cfpg.seed = parse(key, v)?,
            "cfpg.tau" => self.cfpg.tau = parse(key, v)?,
            "cfpg.min_area" => self.cfpg.min_area = parse(key, v)?,
            "cfpg.area_fraction" => self.cfpg.area_fraction = parse(key, v)?,
            "cfpg.morph_radius" => self.cfpg.morph_radius = parse(key, v)?,
            "cfpg.kmeans_max_iter" => self.cfpg.kmeans_max_iter = parse(key, v)?,
            "cfpg.kmeans_tol" => self.cfpg.kmeans_tol = parse(key, v)?,
            "mbo.seed" => self.mbo.seed = parse(key, v)?,
            "mbo.erosion_fraction" => self.mbo.erosion_fraction = parse(key, v)?,
            "mbo.band_factor" => self.mbo.band_factor = parse(key, v)?,
            "mbo.components" => self.mbo.components = parse(key, v)?,
            "mbo.max_outer_iters" => self.mbo.max_outer_iters = parse(key, v)?,
            "mbo.epsilon" => self.mbo.epsilon = parse(key, v)?,
            "mbo.gamma" => self.mbo.energy.gamma = parse(key, v)?,
            "mbo.lambda" => self.mbo.energy.lambda = parse(key, v)?,
            "mbo.beta" => {
                self.mbo.energy.beta = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                };
            }
            "mbo.gmm_max_iter" => self.mbo.gmm_max_iter = parse(key, v)?,
            "mbo.gmm_tol" => self.mbo.gmm_tol = parse(key, v)?,
            "mbo.reg_eps" => self.mbo.reg_eps = parse(key, v)?,
            "mbo.max_fit_pixels" => self.mbo.max_fit_pixels = parse(key, v)?,
            "eval.thresholds" | "eval.precision" => {
                self.thresholds = v
                    .split(',')
                    .map(|t| parse::<f64>(key, t.trim()))
                    .collect::<CliResult<_>>()?;
            }
            other => {
                return Err(CliError::new(
                    ErrorKind::Config,
                    format!("unknown setting {other:?}"),
                ))
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::new(
                    ErrorKind::Config,
                    format!("line {}: expected key = value", n + 1),
                )
            })?;
            self.set(k, v).map_err(|e| {
                CliError::new(ErrorKind::Config, format!("line {}: {}", n + 1, e.message))
            })?;
        }
        Ok(())
    }

    /// `key=value` strings from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> CliResult<()> {
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| {
                CliError::new(ErrorKind::Usage, format!("override {o:?} is not key=value"))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut s = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            s.apply_text(&text).map_err(|e| e.at(p))?;
        }
        s.apply_overrides(overrides)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.cfpg.validate()?;
        self.mbo.validate()?;
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(CliError::new(
                ErrorKind::Config,
                "eval.thresholds must be values in [0, 1]",
            ));
        }
        Ok(())
    }

    /// Every setting, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let c = &self.cfpg;
        let m = &self.mbo;
        let beta = m.energy.beta.map_or("auto".to_string(), |b| b.to_string());
        let thresholds: Vec<String> = self.thresholds.iter().map(f64::to_string).collect();
        let rows: [(&str, String); 21] = [
            ("cfpg.seed", c.seed.to_string()),
            ("cfpg.tau", c.tau.to_string()),
            ("cfpg.min_area", c.min_area.to_string()),
            ("cfpg.area_fraction", c.area_fraction.to_string()),
            ("cfpg.morph_radius", c.morph_radius.to_string()),
            ("cfpg.kmeans_max_iter", c.kmeans_max_iter.to_string()),
            ("cfpg.kmeans_tol", c.kmeans_tol.to_string()),
            ("mbo.seed", m.seed.to_string()),
            ("mbo.erosion_fraction", m.erosion_fraction.to_string()),
            ("mbo.band_factor", m.band_factor.to_string()),
            ("mbo.components", m.components.to_string()),
            ("mbo.max_outer_iters", m.max_outer_iters.to_string()),
            ("mbo.epsilon", m.epsilon.to_string()),
            ("mbo.gamma", m.energy.gamma.to_string()),
            ("mbo.lambda", m.energy.lambda.to_string()),
            ("mbo.beta", beta),
            ("mbo.gmm_max_iter", m.gmm_max_iter.to_string()),
            ("mbo.gmm_tol", m.gmm_tol.to_string()),
            ("mbo.reg_eps", m.reg_eps.to_string()),
            ("mbo.max_fit_pixels", m.max_fit_pixels.to_string()),
            ("eval.thresholds", thresholds.join(",")),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Settings::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

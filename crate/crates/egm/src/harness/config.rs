//! Experiment configuration: flat `key = value` files mirrored by CLI flags.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::graph::GridSpec;
use crate::matcher::CostParams;

pub const SWEEP_NODES: [usize; 3] = [5, 10, 20];
pub const SWEEP_ORIENTATIONS: [usize; 2] = [4, 8];
pub const SWEEP_MU: [f64; 3] = [std::f64::consts::SQRT_2, 2.0, 2.0 * std::f64::consts::SQRT_2];
pub const SWEEP_LAMBDA: [f64; 3] = [3e-9, 3e-6, 3e-3];

/// Matches requiring `--full-scale` beyond this count.
pub const DESK_SCALE_MATCH_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_x: usize,
    pub n_d: usize,
    pub mu: f64,
    pub lambda: f64,
    /// Gaussian envelope width in pixels.
    pub sigma: f64,
    pub per_digit_models: usize,
    pub per_digit_tests: usize,
    pub seed: u64,
    pub shift_seed: u64,
    pub deslant: bool,
    pub shift_test: bool,
    pub parallel: bool,
    pub full_scale: bool,
    pub mnist_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_x: 10,
            n_d: 4,
            mu: 2.0,
            lambda: 3e-9,
            sigma: GaborParams::default().sigma,
            per_digit_models: 100,
            per_digit_tests: 100,
            seed: 20171015,
            shift_seed: 1,
            deslant: true,
            shift_test: false,
            parallel: true,
            full_scale: false,
            mnist_dir: PathBuf::from("data/mnist"),
            cache_dir: None,
            out_dir: None,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Argument(format!("{key}: expected on/off, got {value:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Argument(format!("{key}: cannot parse {value:?}")))
}

/// Parses a frequency ratio; accepts `sqrt2` and `2sqrt2` besides numbers.
pub fn parse_mu(value: &str) -> Result<f64> {
    match value {
        "sqrt2" => Ok(std::f64::consts::SQRT_2),
        "2sqrt2" => Ok(2.0 * std::f64::consts::SQRT_2),
        v => parse_num("mu", v),
    }
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl ExperimentConfig {
    /// Sets one key. Keys match the long CLI flags with `-` replaced by `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "n_x" => self.n_x = parse_num(key, value)?,
            "n_d" => self.n_d = parse_num(key, value)?,
            "mu" => self.mu = parse_mu(value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "per_digit_models" => self.per_digit_models = parse_num(key, value)?,
            "per_digit_tests" => self.per_digit_tests = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "shift_seed" => self.shift_seed = parse_num(key, value)?,
            "deslant" => self.deslant = parse_bool(key, value)?,
            "shift_test" => self.shift_test = parse_bool(key, value)?,
            "parallel" => self.parallel = parse_bool(key, value)?,
            "full_scale" => self.full_scale = parse_bool(key, value)?,
            "mnist_dir" => self.mnist_dir = PathBuf::from(value),
            "cache_dir" => self.cache_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::Argument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Argument(format!("config line {}: expected key = value", n + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Ordered `key = value` lines describing every setting.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("n_x", self.n_x.to_string()),
            ("n_d", self.n_d.to_string()),
            ("mu", self.mu.to_string()),
            ("lambda", self.lambda.to_string()),
            ("sigma", self.sigma.to_string()),
            ("per_digit_models", self.per_digit_models.to_string()),
            ("per_digit_tests", self.per_digit_tests.to_string()),
            ("seed", self.seed.to_string()),
            ("shift_seed", self.shift_seed.to_string()),
            ("deslant", fmt_bool(self.deslant).into()),
            ("shift_test", fmt_bool(self.shift_test).into()),
            ("parallel", fmt_bool(self.parallel).into()),
            ("full_scale", fmt_bool(self.full_scale).into()),
            ("mnist_dir", self.mnist_dir.display().to_string()),
            ("cache_dir", path(&self.cache_dir)),
            ("out_dir", path(&self.out_dir)),
        ]
    }

    pub fn gabor(&self) -> GaborParams {
        self.gabor_bank(self.mu, self.n_d)
    }

    /// Configured envelope with the given frequency ratio and orientations.
    pub fn gabor_bank(&self, mu: f64, n_d: usize) -> GaborParams {
        GaborParams {
            sigma: self.sigma,
            ..GaborParams::with_bank(mu, n_d)
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::standard(self.n_x)
    }

    pub fn cost(&self) -> Result<CostParams> {
        CostParams::new(self.lambda)
    }

    /// Checks hard constraints and returns warnings for values outside the
    /// standard parameter sets.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.per_digit_models == 0 {
            return Err(Error::Argument("per_digit_models must be at least 1".into()));
        }
        if self.per_digit_tests == 0 {
            return Err(Error::Argument("per_digit_tests must be at least 1".into()));
        }
        self.grid()?;
        self.cost()?;
        self.gabor().validate()?;
        let matches = self.per_digit_models * self.per_digit_tests * 100;
        if matches > DESK_SCALE_MATCH_LIMIT && !self.full_scale {
            return Err(Error::Argument(format!(
                "{matches} matches exceeds the desk-scale limit of {DESK_SCALE_MATCH_LIMIT}; \
                 pass --full-scale to run it anyway"
            )));
        }
        let mut warnings = Vec::new();
        if !SWEEP_ORIENTATIONS.contains(&self.n_d) {
            warnings.push(format!("n_d = {} is outside the standard set {{4, 8}}", self.n_d));
        }
        if !SWEEP_MU.iter().any(|m| (m - self.mu).abs() < 1e-12) {
            warnings.push(format!("mu = {} is outside the standard set {{sqrt2, 2, 2sqrt2}}", self.mu));
        }
        if !SWEEP_LAMBDA.contains(&self.lambda) {
            warnings.push(format!("lambda = {} is outside the standard set {{3e-9, 3e-6, 3e-3}}", self.lambda));
        }
        if self.full_scale {
            warnings.push(format!(
                "full-scale run: {matches} matches, expect many hours of compute"
            ));
        }
        Ok(warnings)
    }

    /// Seed for the test subset, distinct from the model subset's.
    pub fn test_seed(&self) -> u64 {
        self.seed ^ 0x5eed_7e57
    }

    /// Seed for the random shift of the test image at position `k`.
    pub fn shift_seed_for(&self, k: usize) -> u64 {
        self.shift_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# desk run\nn_x = 20\nmu = 2sqrt2  # ratio\nlambda=3e-6\ndeslant = off\ncache_dir = /tmp/c\n")
            .unwrap();
        assert_eq!(c.n_x, 20);
        assert_eq!(c.mu, 2.0 * std::f64::consts::SQRT_2);
        assert_eq!(c.lambda, 3e-6);
        assert!(!c.deslant);
        let text: String = c.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut d = ExperimentConfig::default();
        d.apply_text(&text).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::default();
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("deslant", "maybe").is_err());
        assert!(c.apply_text("n_x 10").is_err());
        c.per_digit_models = 0;
        assert!(c.validate().is_err());
        let c = ExperimentConfig { n_x: 7, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn warnings_and_full_scale_gate() {
        let c = ExperimentConfig { lambda: 1e-4, ..Default::default() };
        let w = c.validate().unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("lambda"));
        let big = ExperimentConfig { per_digit_models: 4000, per_digit_tests: 800, ..Default::default() };
        assert!(big.validate().is_err());
        let big = ExperimentConfig { full_scale: true, ..big };
        assert!(big.validate().is_ok());
    }
}

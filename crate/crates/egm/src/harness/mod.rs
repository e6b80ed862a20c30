//! Experiment runner: dataset sampling, jet caching, the single, shifted and
//! sweep experiments, and report files.

pub mod config;
pub mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::classifier::{build_model_bank_from_fields, evaluate_fields, extract_fields, Evaluation};
use crate::error::{Error, Result};
use crate::gabor::{cache, GaborParams, JetField};
use crate::graph::GridSpec;
use crate::matcher::CostParams;
use crate::mnist::{load_balanced, random_shift, Image, LabelledSet, SetSource};

pub use config::ExperimentConfig;
pub use report::{RunReport, SweepReport, SweepRow};

/// Writes jets for `images` to `path` under the given extraction settings.
pub fn cache_jets(images: &[Image], gabor: &GaborParams, deslant: bool, path: &Path) -> Result<Vec<JetField>> {
    let fields = extract_fields(images, gabor, deslant, cfg!(feature = "parallel"))?;
    cache::write(path, &cache_key(images, gabor, deslant), &fields)?;
    Ok(fields)
}

/// Loads jets cached for exactly these images and settings.
pub fn load_cached_jets(images: &[Image], gabor: &GaborParams, deslant: bool, path: &Path) -> Result<Vec<JetField>> {
    cache::read(path, &cache_key(images, gabor, deslant))
}

fn cache_key(images: &[Image], gabor: &GaborParams, deslant: bool) -> cache::CacheKey {
    cache::CacheKey {
        params: gabor.with_slant(0.0),
        deslant,
        fingerprint: cache::fingerprint(images),
    }
}

fn cache_file(dir: &Path, role: &str, images: &[Image], gabor: &GaborParams, deslant: bool) -> PathBuf {
    dir.join(format!(
        "{role}-{:016x}-mu{:.6}-sigma{:.6}-nd{}-{}.egjc",
        cache::fingerprint(images),
        gabor.mu,
        gabor.sigma,
        gabor.orientations,
        if deslant { "deslant" } else { "upright" }
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct FieldKey {
    role: Role,
    mu_bits: u64,
    sigma_bits: u64,
    orientations: usize,
    deslant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Role {
    Models,
    Tests,
    ShiftedTests(u64),
}

/// Sampled model and test sets plus every jet field extracted so far.
///
/// Runs that share Gabor settings reuse extractions; with a cache directory
/// they also persist across processes.
pub struct Session {
    config: ExperimentConfig,
    models: LabelledSet,
    tests: LabelledSet,
    shifted: HashMap<u64, (LabelledSet, Vec<[i32; 2]>)>,
    fields: HashMap<FieldKey, Arc<Vec<JetField>>>,
}

impl Session {
    /// Loads the balanced model and test subsets named by `config`.
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let models = load_balanced(&config.mnist_dir, SetSource::Model, config.per_digit_models, config.seed)?;
        let tests = load_balanced(&config.mnist_dir, SetSource::Test, config.per_digit_tests, config.test_seed())?;
        Ok(Session::from_sets(config, models, tests))
    }

    pub fn from_sets(config: &ExperimentConfig, models: LabelledSet, tests: LabelledSet) -> Self {
        Session {
            config: config.clone(),
            models,
            tests,
            shifted: HashMap::new(),
            fields: HashMap::new(),
        }
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn models(&self) -> &LabelledSet {
        &self.models
    }

    pub fn tests(&self) -> &LabelledSet {
        &self.tests
    }

    /// Test set with every image randomly shifted, and the shifts used.
    pub fn shifted_tests(&mut self, shift_seed: u64) -> &(LabelledSet, Vec<[i32; 2]>) {
        let tests = &self.tests;
        self.shifted.entry(shift_seed).or_insert_with(|| {
            let seeder = ExperimentConfig { shift_seed, ..ExperimentConfig::default() };
            let mut set = tests.clone();
            let mut shifts = Vec::with_capacity(set.len());
            for (k, img) in set.images.iter_mut().enumerate() {
                let (moved, dx, dy) = random_shift(img, seeder.shift_seed_for(k));
                *img = moved;
                shifts.push([dx, dy]);
            }
            (set, shifts)
        })
    }

    fn fields_for(&mut self, role: Role, gabor: &GaborParams, deslant: bool) -> Result<Arc<Vec<JetField>>> {
        let key = FieldKey {
            role,
            mu_bits: gabor.mu.to_bits(),
            sigma_bits: gabor.sigma.to_bits(),
            orientations: gabor.orientations,
            deslant,
        };
        if let Some(f) = self.fields.get(&key) {
            return Ok(f.clone());
        }
        let (images, name): (&[Image], &str) = match role {
            Role::Models => (&self.models.images, "models"),
            Role::Tests => (&self.tests.images, "tests"),
            Role::ShiftedTests(seed) => (&self.shifted_tests(seed).0.images, "shifted"),
        };
        let images = images.to_vec();
        let fields = match &self.config.cache_dir {
            Some(dir) => {
                let path = cache_file(dir, name, &images, gabor, deslant);
                match load_cached_jets(&images, gabor, deslant, &path) {
                    Ok(f) => f,
                    Err(_) => cache_jets(&images, gabor, deslant, &path)?,
                }
            }
            None => extract_fields(&images, gabor, deslant, self.config.parallel)?,
        };
        let fields = Arc::new(fields);
        self.fields.insert(key, fields.clone());
        Ok(fields)
    }

    /// Extracts (or loads from the cache directory) model and test jets for
    /// one Gabor bank; returns the number of fields held.
    pub fn prepare_fields(&mut self, n_d: usize, mu: f64, shift_seed: Option<u64>) -> Result<usize> {
        let gabor = self.config.gabor_bank(mu, n_d);
        gabor.validate()?;
        let deslant = self.config.deslant;
        let models = self.fields_for(Role::Models, &gabor, deslant)?.len();
        let role = shift_seed.map_or(Role::Tests, Role::ShiftedTests);
        Ok(models + self.fields_for(role, &gabor, deslant)?.len())
    }

    /// Builds the bank for one (N_x, N_d, mu) setting and evaluates the test
    /// set (shifted when `shift_seed` is given) under each lambda.
    pub fn evaluate(
        &mut self,
        n_x: usize,
        n_d: usize,
        mu: f64,
        lambdas: &[f64],
        shift_seed: Option<u64>,
    ) -> Result<(Vec<Evaluation>, Duration)> {
        let start = Instant::now();
        let gabor = self.config.gabor_bank(mu, n_d);
        let grid = GridSpec::standard(n_x)?;
        let params = lambdas
            .iter()
            .map(|&l| CostParams::new(l))
            .collect::<Result<Vec<_>>>()?;
        let deslant = self.config.deslant;
        let model_fields = self.fields_for(Role::Models, &gabor, deslant)?;
        let bank = build_model_bank_from_fields(&self.models, &model_fields, &gabor, &grid, deslant)?;
        let (tests, role) = match shift_seed {
            Some(seed) => (self.shifted_tests(seed).0.clone(), Role::ShiftedTests(seed)),
            None => (self.tests.clone(), Role::Tests),
        };
        let test_fields = self.fields_for(role, &gabor, deslant)?;
        let evals = evaluate_fields(&tests, &test_fields, &bank, &params, self.config.parallel)?;
        Ok((evals, start.elapsed()))
    }

    /// The run described by the session's own config.
    pub fn run_config(&mut self, shifted: bool) -> Result<RunReport> {
        let warnings = self.config.validate()?;
        let c = self.config.clone();
        let shift_seed = shifted.then_some(c.shift_seed);
        let (mut evals, wall_time) = self.evaluate(c.n_x, c.n_d, c.mu, &[c.lambda], shift_seed)?;
        let shifts = shift_seed.map(|s| self.shifted_tests(s).1.clone());
        let report = RunReport {
            config: c,
            experiment: if shifted { "shift" } else { "single" },
            warnings,
            models: self.models.len(),
            evaluation: evals.remove(0),
            wall_time,
            shifts,
        };
        if let Some(dir) = &self.config.out_dir {
            report.write(dir)?;
        }
        Ok(report)
    }
}

/// One classification run; writes reports when `out_dir` is set.
pub fn run_single(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    Session::load(config)?.run_config(config.shift_test)
}

/// Same bank, every test image randomly shifted with wrap-around.
pub fn run_shift_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    Session::load(config)?.run_config(true)
}

/// Parameter sets for a sweep; the run covers their cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub n_x: Vec<usize>,
    pub n_d: Vec<usize>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl SweepGrid {
    /// The twelve combinations tabulated for mu = 2.
    pub fn table1() -> Self {
        SweepGrid {
            n_x: vec![5, 10, 20],
            n_d: vec![4, 8],
            mu: vec![2.0],
            lambda: vec![3e-9, 3e-6],
        }
    }

    pub fn full() -> Self {
        SweepGrid {
            n_x: config::SWEEP_NODES.to_vec(),
            n_d: config::SWEEP_ORIENTATIONS.to_vec(),
            mu: config::SWEEP_MU.to_vec(),
            lambda: config::SWEEP_LAMBDA.to_vec(),
        }
    }

    pub fn single(config: &ExperimentConfig) -> Self {
        SweepGrid {
            n_x: vec![config.n_x],
            n_d: vec![config.n_d],
            mu: vec![config.mu],
            lambda: vec![config.lambda],
        }
    }
}

/// Runs every configuration of `grid` on one shared data sample. Settings
/// that differ only in lambda share a single matching pass; failures are
/// recorded per row and the sweep continues.
pub fn run_sweep_in(session: &mut Session, grid: &SweepGrid) -> Result<SweepReport> {
    let mut rows = Vec::new();
    for &n_x in &grid.n_x {
        for &n_d in &grid.n_d {
            for &mu in &grid.mu {
                let outcome = session.evaluate(n_x, n_d, mu, &grid.lambda, None);
                for (k, &lambda) in grid.lambda.iter().enumerate() {
                    let (accuracy, wall_time, error) = match &outcome {
                        Ok((evals, t)) => (Some(evals[k].accuracy()), t.as_secs_f64(), None),
                        Err(e) => (None, 0.0, Some(e.to_string())),
                    };
                    rows.push(SweepRow {
                        n_x,
                        n_d,
                        mu,
                        lambda,
                        accuracy,
                        wall_time,
                        error,
                    });
                }
            }
        }
    }
    let report = SweepReport {
        config: session.config().clone(),
        models: session.models().len(),
        tests: session.tests().len(),
        rows,
    };
    if let Some(dir) = &session.config().out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

pub fn run_sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<SweepReport> {
    if base.per_digit_models == 0 || base.per_digit_tests == 0 {
        return Err(Error::Argument("sweep needs nonempty model and test sets".into()));
    }
    let mut session = Session::load(base)?;
    run_sweep_in(&mut session, grid)
}

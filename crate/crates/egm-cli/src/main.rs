use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egm::classifier::{build_model_bank, inspect_match};
use egm::harness::report::{match_csv, overlay_pgm};
use egm::harness::{run_sweep_in, ExperimentConfig, Session, SweepGrid};
use egm::matcher::CostParams;
use egm::Error;

#[derive(Parser, Debug)]
#[command(name = "egm", version, about = "Elastic graph matching of Gabor-jet grids on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One classification run over the sampled test set
    Classify(Common),
    /// Accuracy over a grid of parameter settings
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "table1")]
        grid: GridChoice,
    },
    /// Classify randomly shifted tests, next to the unshifted run
    Shift(Common),
    /// Pre-extract model and test jets into the cache directory
    Cache(Common),
    /// Dump one test-versus-model match
    Inspect {
        #[command(flatten)]
        common: Common,
        /// Index into the sampled test set
        #[arg(long, default_value_t = 0)]
        test_index: usize,
        /// Index into the model bank
        #[arg(long, default_value_t = 0)]
        model_index: usize,
        /// Write a magnified PGM of the matched grid over the test image
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GridChoice {
    /// N_x in {5,10,20}, N_d in {4,8}, mu = 2, lambda in {3e-9,3e-6}
    Table1,
    /// Every combination of the four parameter sets
    Full,
    /// Only the configured setting
    Single,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Config file of `key = value` lines; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[arg(long)]
    per_digit_models: Option<usize>,
    #[arg(long)]
    per_digit_tests: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shift_seed: Option<u64>,
    #[arg(long, value_enum)]
    deslant: Option<OnOff>,
    #[arg(long)]
    n_x: Option<usize>,
    #[arg(long)]
    n_d: Option<usize>,
    /// Number, `sqrt2` or `2sqrt2`
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Gaussian envelope width in pixels
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Single-threaded evaluation
    #[arg(long)]
    serial: bool,
    /// Allow runs beyond desk scale
    #[arg(long)]
    full_scale: bool,
}

impl Common {
    fn config(&self) -> egm::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            c.apply_text(&text)?;
        }
        let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| c.set(k, &v));
        set("mnist_dir", self.mnist_dir.as_ref().map(|p| p.display().to_string()))?;
        set("per_digit_models", self.per_digit_models.map(|v| v.to_string()))?;
        set("per_digit_tests", self.per_digit_tests.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("shift_seed", self.shift_seed.map(|v| v.to_string()))?;
        set("deslant", self.deslant.map(|d| matches!(d, OnOff::On).to_string()))?;
        set("n_x", self.n_x.map(|v| v.to_string()))?;
        set("n_d", self.n_d.map(|v| v.to_string()))?;
        set("mu", self.mu.clone())?;
        set("lambda", self.lambda.map(|v| v.to_string()))?;
        set("sigma", self.sigma.map(|v| v.to_string()))?;
        set("cache_dir", self.cache_dir.as_ref().map(|p| p.display().to_string()))?;
        set("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string()))?;
        if self.serial {
            c.parallel = false;
        }
        if self.full_scale {
            c.full_scale = true;
        }
        Ok(c)
    }
}

fn session(common: &Common) -> egm::Result<Session> {
    let config = common.config()?;
    for w in config.validate()? {
        eprintln!("warning: {w}");
    }
    Session::load(&config)
}

fn run(cli: Cli) -> egm::Result<()> {
    match cli.command {
        Command::Classify(common) => {
            let mut s = session(&common)?;
            let shifted = s.config().shift_test;
            let r = s.run_config(shifted)?;
            print!("{}", r.summary());
        }
        Command::Shift(common) => {
            let mut s = session(&common)?;
            let base = s.run_config(false)?.accuracy();
            let r = s.run_config(true)?;
            print!("{}", r.summary());
            println!("unshifted_accuracy = {base}");
            println!("shifted_accuracy = {}", r.accuracy());
        }
        Command::Sweep { common, grid } => {
            let mut s = session(&common)?;
            let grid = match grid {
                GridChoice::Table1 => SweepGrid::table1(),
                GridChoice::Full => SweepGrid::full(),
                GridChoice::Single => SweepGrid::single(s.config()),
            };
            print!("{}", run_sweep_in(&mut s, &grid)?.csv());
        }
        Command::Cache(common) => {
            let mut s = session(&common)?;
            let c = s.config().clone();
            if c.cache_dir.is_none() {
                return Err(Error::Argument("cache needs --cache-dir".into()));
            }
            let n = s.prepare_fields(c.n_d, c.mu, None)?;
            println!("cached {n} jet fields in {}", c.cache_dir.unwrap().display());
        }
        Command::Inspect {
            common,
            test_index,
            model_index,
            pgm,
        } => {
            let s = session(&common)?;
            let c = s.config();
            let test = s.tests().images.get(test_index).ok_or_else(|| {
                Error::Argument(format!("test index {test_index} outside {} tests", s.tests().len()))
            })?;
            let bank = build_model_bank(s.models(), &c.gabor(), &c.grid()?, c.deslant)?;
            let (prepared, result) = inspect_match(test, &bank, model_index, CostParams::new(c.lambda)?)?;
            let entry = &bank.entries[model_index];
            print!("{}", match_csv(&[(s.tests().ids[test_index], entry.model_id, entry.class, &result)]));
            let graph = prepared.graph();
            println!("node,pixel_x,pixel_y,disp_x,disp_y");
            let pixels = result.test_pixels(graph, test.width(), test.height());
            for (i, (p, d)) in pixels.iter().zip(&result.displacements).enumerate() {
                println!("{i},{},{},{},{}", p[0], p[1], d[0], d[1]);
            }
            if let Some(path) = pgm {
                let bytes = overlay_pgm(test, &pixels, graph.topology().links(), 12);
                std::fs::write(&path, bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) => 1,
        Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

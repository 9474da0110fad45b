use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hitstat::experiments::{
    binomial_poisson_grid, emit_chen_stein, emit_plot_data, emit_short_returns, emit_tower,
    run_chen_stein_suite, run_return_stats, run_scaling, run_short_return_scan, run_tower,
    write_json, ChenSteinConfig, ExperimentConfig, SuiteKind, SystemConfig, TowerConfig,
};
use hitstat::{Error, Result};

#[derive(Parser)]
#[command(name = "hitstat", version, about = "Return-time statistics experiments")]
struct Cli {
    /// Size of the worker pool (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Visit-count distributions against Poisson, per radius.
    ReturnStats(OrbitArgs),
    /// Chen–Stein bound versus exact laws on randomized processes.
    ChenStein(ChenSteinArgs),
    /// Ω decay, Kac ratio, distortion and intermittent return tails.
    Tower(TowerArgs),
    /// Monte Carlo bounds on the measure of very-short-return centers.
    ShortReturns(OrbitArgs),
    /// Return statistics and short-return scan with decay fits.
    Scaling(OrbitArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    common: Common,
    /// doubling, cat_map, intermittent or gauss.
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated, strictly decreasing radii.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long)]
    n_centers: Option<u64>,
    #[arg(long)]
    n_starts: Option<u64>,
    #[arg(long)]
    a_frak: Option<f64>,
    #[arg(long)]
    v_samples: Option<u64>,
    #[arg(long)]
    resamples: Option<usize>,
}

#[derive(Args)]
struct ChenSteinArgs {
    #[command(flatten)]
    common: Common,
    /// iid or markov.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    instances: Option<u64>,
    #[arg(long)]
    n_max: Option<u64>,
}

#[derive(Args)]
struct TowerArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    max_r: Option<u32>,
    #[arg(long)]
    wobble: Option<f64>,
    #[arg(long)]
    kac_steps: Option<u64>,
    /// Comma-separated intermittency exponents whose return tails are fitted.
    #[arg(long, value_delimiter = ',')]
    tail_alpha: Option<Vec<f64>>,
    #[arg(long)]
    tail_samples: Option<u64>,
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads the config file (if any) and forces the mandatory seed in.
fn load_toml<T>(common: &Common, parse: fn(&str) -> Result<T>) -> Result<Option<T>> {
    common
        .config
        .as_deref()
        .map(|p| {
            let mut text = read_config(p)?;
            if !text.lines().any(|l| l.trim_start().starts_with("seed")) {
                text = format!("seed = {}\n{text}", common.seed);
            }
            parse(&text)
        })
        .transpose()
}

fn orbit_config(args: &OrbitArgs) -> Result<ExperimentConfig> {
    let mut c = load_toml(&args.common, ExperimentConfig::from_toml_str)?
        .unwrap_or_else(|| ExperimentConfig::new(SystemConfig::default(), args.common.seed));
    c.seed = args.common.seed;
    if let Some(d) = &args.common.output_dir {
        c.output_dir = d.clone();
    }
    if let Some(s) = &args.system {
        c.system.name = s.clone();
    }
    if args.alpha.is_some() {
        c.system.alpha = args.alpha;
    }
    if let Some(t) = args.t {
        c.t_param = t;
    }
    if let Some(r) = &args.rho {
        c.rho_grid = r.clone();
    }
    if let Some(n) = args.n_centers {
        c.n_centers = n;
    }
    if let Some(n) = args.n_starts {
        c.n_starts_per_center = n;
    }
    if args.a_frak.is_some() {
        c.a_frak = args.a_frak;
    }
    if let Some(v) = args.v_samples {
        c.v_samples = v;
    }
    if let Some(r) = args.resamples {
        c.bootstrap_resamples = r;
    }
    c.validate()?;
    Ok(c)
}

fn chen_stein_config(args: &ChenSteinArgs) -> Result<ChenSteinConfig> {
    let mut c = load_toml(&args.common, ChenSteinConfig::from_toml_str)?
        .unwrap_or_else(|| ChenSteinConfig::new(SuiteKind::Markov, args.common.seed));
    c.seed = args.common.seed;
    if let Some(d) = &args.common.output_dir {
        c.output_dir = d.clone();
    }
    if let Some(k) = &args.kind {
        c.kind = match k.as_str() {
            "iid" => SuiteKind::Iid,
            "markov" => SuiteKind::Markov,
            other => return Err(Error::Config(format!("unknown process kind `{other}`"))),
        };
    }
    if let Some(n) = args.instances {
        c.instances = n;
    }
    if let Some(n) = args.n_max {
        c.n_max = n;
    }
    c.validate()?;
    Ok(c)
}

fn tower_config(args: &TowerArgs) -> Result<TowerConfig> {
    let mut c = load_toml(&args.common, TowerConfig::from_toml_str)?
        .unwrap_or_else(|| TowerConfig::new(args.common.seed));
    c.seed = args.common.seed;
    if let Some(d) = &args.common.output_dir {
        c.output_dir = d.clone();
    }
    if let Some(l) = &args.lambda {
        c.lambdas = l.clone();
    }
    if let Some(m) = args.max_r {
        c.max_r = m;
    }
    if let Some(w) = args.wobble {
        c.wobble_delta = w;
    }
    if let Some(k) = args.kac_steps {
        c.kac_steps = k;
    }
    if let Some(a) = &args.tail_alpha {
        c.tail_alphas = a.clone();
    }
    if let Some(s) = args.tail_samples {
        c.tail_samples = s;
    }
    Ok(c)
}

fn run(command: Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::ReturnStats(args) => {
            let c = orbit_config(&args)?;
            emit_plot_data(&run_return_stats(&c)?, &c.output_dir)
        }
        Command::ShortReturns(args) => {
            let c = orbit_config(&args)?;
            emit_short_returns(&run_short_return_scan(&c)?, &c.output_dir)
        }
        Command::Scaling(args) => {
            let c = orbit_config(&args)?;
            let (stats, scan) = run_scaling(&c)?;
            let mut paths = emit_plot_data(&stats, &c.output_dir)?;
            paths.extend(emit_short_returns(&scan, &c.output_dir)?);
            let fits = c.output_dir.join("scaling.json");
            write_json(&fits, &(&stats.decay_fit, &scan.decay_fit))?;
            paths.push(fits);
            Ok(paths)
        }
        Command::ChenStein(args) => {
            let c = chen_stein_config(&args)?;
            let suite = run_chen_stein_suite(&c)?;
            let grid = binomial_poisson_grid(&[10, 100, 1000], &[0.5, 1.0, 2.0])?;
            let paths = emit_chen_stein(&suite, &grid, &c.output_dir)?;
            if suite.violations > 0 {
                return Err(Error::Hypothesis(format!(
                    "{} Chen–Stein bound violations (see {})",
                    suite.violations,
                    paths[0].display()
                )));
            }
            Ok(paths)
        }
        Command::Tower(args) => {
            let c = tower_config(&args)?;
            emit_tower(&run_tower(&c)?, &c.output_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = (|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = cli.workers {
            if w == 0 {
                return Err(Error::Config("--workers must be positive".into()));
            }
            builder = builder.num_threads(w);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| run(cli.command))
    })();
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

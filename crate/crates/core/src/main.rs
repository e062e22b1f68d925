use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use cgp_core::constraints::{build_constraints, interpolate, ConstraintSpec, KnotModel};
use cgp_core::estimators::{cmle_joint, mle_grid, profile_variance, EstimationGrid, McConfig};
use cgp_core::experiment::density::{kde, median};
use cgp_core::experiment::figure::{render_density_figure, Series};
use cgp_core::experiment::{run_experiment, ExperimentConfig, Scenario};
use cgp_core::gp::{equispaced, ObservationSet};
use cgp_core::linalg::cross_covariance;
use cgp_core::prediction::{predict_constrained, write_predictions, write_predictions_csv};
use cgp_core::sampler::{sample_auto, Gaussian, SamplerConfig};
use cgp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cgp", version, about = "Gaussian-process covariance estimation under inequality constraints")]
struct Cli {
    /// Experiment config file (`key = value` per line); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one (constrained) trajectory and write it as `x,y` CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the trajectory at the knots instead of the n design points.
        #[arg(long)]
        at_knots: bool,
    },
    /// MLE and constrained MLE on an `x,y` CSV dataset; prints JSON.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Estimate σ² only, at the configured ρ.
        #[arg(long)]
        fixed_rho: bool,
    },
    /// Kriging and constrained kriging predictions at the given targets.
    Predict {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        targets: Vec<f64>,
        #[arg(long, value_enum, default_value_t = SamplerChoice::Auto)]
        sampler: SamplerChoice,
    },
    /// Run a Monte-Carlo experiment and write its output directory.
    Experiment {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Render a density figure from an experiment's samples.csv.
    Report {
        #[arg(long)]
        samples: PathBuf,
        /// Standard deviation of the limit normal; read from manifest.json next to the samples when absent.
        #[arg(long)]
        limit_sd: Option<f64>,
        #[arg(long, default_value = "Standardized estimation error")]
        title: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerChoice {
    Auto,
    Rejection,
    Gibbs,
}

/// Overrides of experiment-config keys.
#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    nugget: Option<f64>,
    /// none, bounds, monotone or convex.
    #[arg(long)]
    constraint: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    lower: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    upper: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_an: Option<usize>,
    #[arg(long)]
    sigma2_grid: Option<usize>,
    #[arg(long)]
    rho_grid: Option<usize>,
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    max_tries: Option<usize>,
}

fn resolve_config(cli: &Cli, model: &ModelArgs) -> Result<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($src:expr => $dst:ident),* $(,)?) => {
            $(if let Some(v) = $src.clone() { c.$dst = v; })*
        };
    }
    set!(
        cli.seed => seed, cli.threads => threads,
        model.family => family, model.sigma2 => sigma2, model.rho => rho, model.nugget => nugget,
        model.constraint => constraint, model.lower => lower, model.upper => upper,
        model.n => n, model.m => m, model.replicates => replicates, model.n_t => n_t, model.n_an => n_an,
        model.sigma2_grid => sigma2_grid, model.rho_grid => rho_grid, model.rho_min => rho_min,
        model.rho_max => rho_max, model.draws => prediction_draws, model.max_tries => max_tries,
    );
    if model.nu.is_some() {
        c.nu = model.nu;
    }
    if model.s.is_some() {
        c.s = model.s;
    }
    if model.mu.is_some() {
        c.mu = model.mu;
    }
    if let Some(name) = &cli.scenario {
        c.scenario = Scenario::parse(name)?;
    }
    c.validate()?;
    Ok(c)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(cli: &Cli, model: &ModelArgs, at_knots: bool) -> Result<()> {
    let c = resolve_config(cli, model)?;
    let knots = KnotModel::equispaced(c.effective_m())?;
    let constraint = build_constraints(c.constraint_kind()?, &knots)?;
    let prior = Gaussian::new(DVector::zeros(knots.m()), &cross_covariance(&c.kernel()?, knots.knots(), knots.knots()))?;
    let trajectory = sample_auto(&prior, &constraint, Some(&knots), 1, c.max_tries, c.seed)?.row(0);
    let obs = if at_knots {
        ObservationSet::new(knots.knots().to_vec(), trajectory)?
    } else {
        let x = equispaced(c.n);
        let y = x.iter().map(|&x| interpolate(&trajectory, &knots, x)).collect::<Result<_>>()?;
        ObservationSet::new(x, y)?
    };
    match &cli.out {
        Some(path) => obs.write_csv(path),
        None => {
            println!("x,y");
            for (x, y) in obs.points().iter().zip(obs.values()) {
                println!("{x:e},{y:e}");
            }
            Ok(())
        }
    }
}

fn constraint_on(c: &ExperimentConfig, knots: &KnotModel) -> Result<ConstraintSpec> {
    build_constraints(c.constraint_kind()?, knots)
}

fn read_data(path: &Path) -> Result<ObservationSet> {
    ObservationSet::read_csv(path).map_err(|e| match e {
        Error::Io(_) | Error::Csv(_) => Error::Parse(format!("{}: {e}", path.display())),
        other => other,
    })
}

fn estimate(cli: &Cli, model: &ModelArgs, data: &Path, fixed_rho: bool) -> Result<()> {
    let c = resolve_config(cli, model)?;
    let obs = read_data(data)?;
    let family = c.family()?;
    let n = obs.len();
    let grid = if fixed_rho {
        let center = profile_variance(&obs, family, &[c.rho])?[0];
        EstimationGrid::variance(center, n, c.sigma2_grid, c.rho)?
    } else {
        let rho_mid = 0.5 * (c.rho_min + c.rho_max);
        let e = family.microergodic_exponent();
        let center = profile_variance(&obs, family, &[rho_mid])?[0] / rho_mid.powf(e);
        EstimationGrid::microergodic(center, e, n, (c.rho_min, c.rho_max), c.rho_grid, c.sigma2_grid)?
    };
    let knots = KnotModel::containing(c.m, obs.points())?;
    let constraint = constraint_on(&c, &knots)?;
    let mc = McConfig { n_an: c.n_an, n_bn: c.n_t, seed: c.seed };
    let mle = mle_grid(&obs, family, &grid)?;
    let cmle = cmle_joint(&obs, family, &grid, &constraint, &knots, &mc, None)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        cmle.write_surface_csv(&dir.join("surface.csv"))?;
    }
    let report = serde_json::json!({
        "n": n,
        "knots": knots.m(),
        "mle": mle.summary_json(),
        "cmle": cmle.summary_json(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn predict(cli: &Cli, model: &ModelArgs, data: &Path, targets: &[f64], sampler: SamplerChoice) -> Result<()> {
    let c = resolve_config(cli, model)?;
    if targets.is_empty() {
        return Err(Error::Validation("--targets needs at least one value".into()));
    }
    let obs = read_data(data)?;
    let spec = c.kernel()?;
    let knots = KnotModel::containing(c.m, obs.points())?;
    let constraint = constraint_on(&c, &knots)?;
    let run = |config: SamplerConfig| predict_constrained(&spec, &obs, &knots, &constraint, targets, &config);
    let rejection = SamplerConfig::rejection(c.prediction_draws, c.max_tries, c.seed);
    let gibbs = SamplerConfig::gibbs(c.prediction_draws, c.seed);
    let results = match sampler {
        SamplerChoice::Rejection => run(rejection)?,
        SamplerChoice::Gibbs => run(gibbs)?,
        SamplerChoice::Auto => match run(rejection) {
            Err(Error::InfeasibleSuspected { .. }) => run(gibbs)?,
            other => other?,
        },
    };
    match &cli.out {
        Some(path) => write_predictions_csv(&results, path),
        None => write_predictions(&results, std::io::stdout().lock()),
    }
}

fn experiment(cli: &Cli, model: &ModelArgs) -> Result<()> {
    let c = resolve_config(cli, model)?;
    if c.knots_below_n() {
        eprintln!("warning: {} knots for {} observations; more knots than observations is recommended", c.effective_m(), c.n);
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let output = run_experiment(&c)?;
    output.write_to(&dir)?;
    for s in &output.summaries {
        eprintln!(
            "{:>14}  count {:>5}  median {:>9.4}  sd {:>8.4}  ks {}",
            s.name,
            s.count,
            s.median,
            s.sd,
            s.ks_distance.map(|k| format!("{k:.4}")).unwrap_or_else(|| "-".into())
        );
    }
    eprintln!("wrote {} ({} failures, {:.1} s)", dir.display(), output.failures(), output.runtime_seconds);
    Ok(())
}

fn report(cli: &Cli, samples: &Path, limit_sd: Option<f64>, title: &str) -> Result<()> {
    let mut reader = csv::Reader::from_path(samples)?;
    let headers = reader.headers()?.clone();
    let names: Vec<String> = headers.iter().skip(2).map(String::from).collect();
    if names.is_empty() {
        return Err(Error::Validation("samples file has no estimator columns".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record?;
        for (k, field) in record.iter().skip(2).enumerate() {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse(format!("bad value '{field}' in {}", samples.display())))?;
            columns[k].push(v);
        }
    }
    let limit = match limit_sd {
        Some(sd) => Some(sd),
        None => manifest_limit_sd(&samples.with_file_name("manifest.json")),
    };
    let series = names
        .iter()
        .zip(&columns)
        .map(|(name, values)| Ok(Series { label: name.clone(), curve: kde(values)?, median: median(values) }))
        .collect::<Result<Vec<_>>>()?;
    let svg = render_density_figure(title, "standardized estimation error", &series, limit);
    write_or_print(cli.out.as_deref(), &svg)
}

fn manifest_limit_sd(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(path).ok()?;
    let manifest: serde_json::Value = serde_json::from_str(&text).ok()?;
    manifest["summaries"].as_array()?.iter().find_map(|s| s["limit_sd"].as_f64())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate { model, at_knots } => simulate(&cli, model, *at_knots),
        Command::Estimate { data, model, fixed_rho } => estimate(&cli, model, data, *fixed_rho),
        Command::Predict { data, model, targets, sampler } => predict(&cli, model, data, targets, *sampler),
        Command::Experiment { model } => experiment(&cli, model),
        Command::Report { samples, limit_sd, title } => report(&cli, samples, *limit_sd, title),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

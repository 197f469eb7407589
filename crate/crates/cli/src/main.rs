use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use maxnorm::harness::{fit_scaling_slope, make_ground_truth, run_experiment_to, ExperimentConfig};
use maxnorm::model_select::{estimate_rank, PartialMatrix, RankSearchConfig, SearchMode};
use maxnorm::sampling::{observe, DistributionSpec, NoiseKind, NoiseModel, ObservationSet, SamplingDistribution};
use maxnorm::solver::{self, Algorithm, SolverConfig};
use maxnorm::theory::{
    packing_generate, packing_verify, rademacher_sign_sup, rate_bounds, KeyValueReport, PackingConfig, RateParams,
};
use maxnorm::{ConstraintSet, DenseMatrix, Error, Result};

#[derive(Parser)]
#[command(name = "maxnorm", version, about = "Max-norm constrained matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a low-rank ground truth and noisy observations of it.
    Simulate(SimulateArgs),
    /// Complete a matrix from an observation file.
    Fit(FitArgs),
    /// Choose the rank by comparing column spectra of candidate completions.
    RankEstimate(RankArgs),
    /// Run a sample-size sweep described by a config file and write per-trial CSV.
    Experiment(ExperimentArgs),
    /// Packing sets, sign-matrix Rademacher estimates and rate formulas.
    #[command(subcommand)]
    Theory(TheoryCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingChoice {
    Uniform,
    Ramp,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseChoice {
    Gaussian,
    Laplace,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Pgd,
    Stepwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeChoice {
    Rank,
    MaxNorm,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    d1: usize,
    #[arg(long)]
    d2: usize,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Number of observations, drawn with replacement.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = SamplingChoice::Uniform)]
    sampling: SamplingChoice,
    /// Sampling distribution file; overrides --sampling.
    #[arg(long)]
    distribution: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NoiseChoice::Gaussian)]
    noise: NoiseChoice,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the ground truth; defaults to --seed.
    #[arg(long)]
    truth_seed: Option<u64>,
    /// Output path for the ground-truth matrix.
    #[arg(long)]
    truth: PathBuf,
    /// Output path for the observations.
    #[arg(long)]
    obs: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    /// Factor width.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SolverChoice::Pgd)]
    solver: SolverChoice,
    /// Stepwise passes over the observed cells.
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Step halvings allowed per PGD iteration; 0 runs the fixed-step recursion.
    #[arg(long, default_value_t = 20)]
    max_halvings: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            k: self.k,
            tau: self.tau,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            algorithm: match self.solver {
                SolverChoice::Pgd => Algorithm::Pgd,
                SolverChoice::Stepwise => Algorithm::Stepwise,
            },
            epochs: self.epochs,
            max_halvings: self.max_halvings,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    obs: PathBuf,
    /// Entrywise bound.
    #[arg(long)]
    alpha: f64,
    /// Bound on squared factor row norms.
    #[arg(long)]
    radius: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path for the completed matrix.
    #[arg(long)]
    out: PathBuf,
    /// Ground truth to score the completion against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    obs: PathBuf,
    /// Entry bound; defaults to the largest observed magnitude.
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long, default_value_t = 6)]
    r_max: usize,
    #[arg(long, value_enum, default_value_t = ModeChoice::Rank)]
    mode: ModeChoice,
    /// Radius increment in max-norm mode.
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path for the search report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides `output` in the config. Without either, CSV goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Generate a random packing family and check its separation.
    Packing {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// `(R / alpha)^2`.
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 100)]
        count_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write the generated matrices into.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Estimate the sign-matrix Rademacher complexity on a uniform index sample.
    Rademacher {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the upper and lower rate formulas.
    Rates {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let truth = make_ground_truth(a.d1, a.d2, a.rank, a.alpha, a.truth_seed.unwrap_or(a.seed))?;
    let pi = match &a.distribution {
        Some(path) => {
            let pi = SamplingDistribution::read_from(open(path)?)?;
            if pi.shape() != (a.d1, a.d2) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", a.d1, a.d2),
                    actual: format!("{}x{}", pi.shape().0, pi.shape().1),
                });
            }
            pi
        }
        None => match a.sampling {
            SamplingChoice::Uniform => SamplingDistribution::uniform(a.d1, a.d2)?,
            SamplingChoice::Ramp => DistributionSpec::ramp(a.d1, a.d2).build(a.d1, a.d2, false)?,
        },
    };
    let noise = match a.noise {
        NoiseChoice::Gaussian => NoiseModel::new(NoiseKind::Gaussian, a.sigma)?,
        NoiseChoice::Laplace => NoiseModel::new(NoiseKind::Laplace, a.sigma)?,
        NoiseChoice::None => NoiseModel::none(),
    };
    let idx = pi.sample_indices(a.n, a.seed);
    let obs = observe(&truth.matrix, &idx, &noise, a.seed)?;

    let mut w = create(&a.truth)?;
    truth.matrix.write_to(&mut w)?;
    w.flush()?;
    let mut w = create(&a.obs)?;
    obs.write_to(&mut w)?;
    w.flush()?;
    println!("observations={}", obs.len());
    println!("alpha={}", truth.witness.alpha());
    println!("radius={}", truth.witness.radius());
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let obs = ObservationSet::read_from(open(&a.obs)?)?;
    let constraints = ConstraintSet::new(a.alpha, a.radius)?;
    let cfg = a.solver.config();
    let res = solver::fit(&obs, &constraints, &cfg)?;

    let mut w = create(&a.out)?;
    res.completed.write_to(&mut w)?;
    w.flush()?;
    let (d1, d2) = obs.shape();
    println!("k={}", cfg.width(d1, d2));
    println!("iterations={}", res.iterations_run);
    println!("initial_objective={}", res.objective_trace[0]);
    println!("final_objective={}", res.final_objective());
    println!("feasible_rows={}", res.feasible.rows);
    println!("feasible_linf={}", res.feasible.linf);
    if let Some(path) = &a.truth {
        let truth = DenseMatrix::read_from(open(path)?)?;
        let diff = res.completed.sub(&truth)?;
        println!("per_entry_mse={}", diff.frobenius_sq() / (d1 * d2) as f64);
    }
    Ok(())
}

fn rank_estimate(a: &RankArgs) -> Result<()> {
    let obs = ObservationSet::read_from(open(&a.obs)?)?;
    let partial = PartialMatrix::from_observations(&obs);
    let cfg = RankSearchConfig {
        alpha0: a.alpha0,
        r_max: a.r_max,
        solver: a.solver.config(),
        mode: match a.mode {
            ModeChoice::Rank => SearchMode::Rank,
            ModeChoice::MaxNorm => SearchMode::MaxNorm { delta: a.delta },
        },
        keep_profiles: false,
    };
    let est = estimate_rank(&partial, &cfg)?;
    let mut w = create(&a.out)?;
    est.write_report(&mut w)?;
    w.flush()?;
    for c in &est.candidates {
        println!("e_{}={}", c.r, c.error);
    }
    println!("r_star={}", est.r_star);
    println!("radius_star={}", est.radius_star);
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let output = a.output.clone().or_else(|| cfg.output.clone());
    let records = match &output {
        Some(path) => {
            let records = run_experiment_to(&cfg, Some(create(path)?))?;
            println!("trials={}", records.len());
            records
        }
        None => run_experiment_to(&cfg, Some(io::stdout()))?,
    };
    // The CSV may occupy stdout, so the fit summary goes to stderr there.
    if cfg.n_grid.len() >= 3 {
        let fit = fit_scaling_slope(&records)?;
        let summary = format!("slope={}\nintercept={}\nr2={}", fit.slope, fit.intercept, fit.r2);
        if output.is_some() {
            println!("{summary}");
        } else {
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn theory(cmd: &TheoryCommand) -> Result<()> {
    let stdout = io::stdout().lock();
    match *cmd {
        TheoryCommand::Packing {
            d1,
            d2,
            alpha,
            gamma,
            r,
            count_cap,
            seed,
            ref out_dir,
        } => {
            let cfg = PackingConfig::new(d1, d2, alpha, gamma, r, count_cap)?;
            let set = packing_generate(&cfg, seed)?;
            if let Some(dir) = out_dir {
                fs::create_dir_all(dir)?;
                let width = set.len().saturating_sub(1).to_string().len();
                for (i, m) in set.iter().enumerate() {
                    let mut w = create(&dir.join(format!("packing_{i:0width$}.txt")))?;
                    m.write_to(&mut w)?;
                    w.flush()?;
                }
            }
            packing_verify(&set, alpha, gamma)?.write_report(stdout)
        }
        TheoryCommand::Rademacher {
            d1,
            d2,
            n,
            draws,
            seed,
        } => {
            let idx = SamplingDistribution::uniform(d1, d2)?.sample_indices(n, seed);
            rademacher_sign_sup(d1, d2, &idx, draws, seed)?.write_report(stdout)
        }
        TheoryCommand::Rates {
            alpha,
            sigma,
            radius,
            d1,
            d2,
            n,
            mu,
            l,
        } => rate_bounds(&RateParams {
            alpha,
            sigma,
            radius,
            d1,
            d2,
            n,
            mu,
            l,
        })?
        .write_report(stdout),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::RankEstimate(a) => rank_estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::Theory(cmd) => theory(cmd),
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Divergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

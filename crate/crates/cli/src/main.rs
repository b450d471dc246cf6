use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reward_advancement::io::{
    read_trajectories, write_json, write_trajectories, AdvancementDoc, BetaDoc, EmpiricalModelDoc, FeatureDoc, MceDoc,
    MdpDoc, MinCostDoc, PolicyDoc,
};
use reward_advancement::mincost::RewardBounds;
use reward_advancement::objectworld::{
    default_features, perturbed_mce_target, write_accuracy_csv, write_cost_curve_csv, ExperimentOptions,
};
use reward_advancement::{
    advancement_delta_q, build_object_world, estimate_transitions, mce_policy, min_reward_solution_with_bounds,
    run_accuracy_experiment, run_cost_curve_experiment, simulate, verify_transformation, AdvancementOptions, Error,
    Fallback, FeatureModel, Mdp, MinCostOptions, ModelSkeleton, ObjectWorldSpec, SolverOptions, StochasticPolicy,
};
use serde::de::DeserializeOwned;

mod exit;

use exit::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "rewadv",
    version,
    about = "MCE policies and min-cost reward advancement for finite MDPs"
)]
struct Cli {
    #[command(flatten)]
    numeric: NumericArgs,

    /// Output format, where a command supports more than one.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Output path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct NumericArgs {
    /// Solver stopping tolerance.
    #[arg(long = "tol", global = true, env = "REWADV_TOL", default_value_t = 1e-10)]
    tolerance: f64,

    #[arg(long, global = true, default_value_t = 100_000)]
    max_iters: usize,

    /// Smallest admissible target probability.
    #[arg(long, global = true, default_value_t = 1e-8)]
    eps_floor: f64,

    /// Largest policy deviation accepted when verifying an advancement.
    #[arg(long, global = true, default_value_t = 1e-6)]
    verify_tol: f64,
}

impl NumericArgs {
    fn check(&self) -> Result<(), Failure> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Failure::usage(format!(
                "--tol must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iters == 0 {
            return Err(Failure::usage("--max-iters must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.eps_floor) {
            return Err(Failure::usage(format!(
                "--eps-floor must lie in [0, 1), got {}",
                self.eps_floor
            )));
        }
        if self.verify_tol.is_nan() || self.verify_tol <= 0.0 {
            return Err(Failure::usage("--verify-tol must be positive"));
        }
        Ok(())
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions::default()
            .with_tolerance(self.tolerance)
            .with_max_iters(self.max_iters)
    }

    fn advancement(&self) -> AdvancementOptions {
        AdvancementOptions {
            epsilon_floor: self.eps_floor,
            verify_tolerance: self.verify_tol,
            solver: self.solver(),
        }
    }

    fn mincost(&self) -> MinCostOptions {
        MinCostOptions {
            advancement: self.advancement(),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the MCE policy and its Q-table.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
    },
    /// Compute the advancement toward a target policy and verify it.
    Advance {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// State potential; zero when omitted.
        #[arg(long)]
        beta: Option<PathBuf>,
    },
    /// Minimum-cost additional reward and its feature assignment.
    Mincost {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Estimate transitions from these trajectories instead of using the
        /// ones in the MDP file.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Handling of state-action pairs missing from the trajectories.
        #[arg(long, value_enum, default_value_t = FallbackArg::Uniform)]
        fallback: FallbackArg,
        /// Where to write the estimated transition model.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Sample trajectories, one JSON array of [state, action] pairs per line.
    Simulate {
        #[arg(long)]
        mdp: PathBuf,
        /// Policy to follow; the MCE policy when omitted.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an object-world experiment and write its result table.
    Experiment(ExperimentArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FallbackArg {
    Uniform,
    Reject,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::Uniform => Fallback::UniformSuccessor,
            FallbackArg::Reject => Fallback::Reject,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ExperimentName {
    Accuracy,
    CostCurve,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DefaultTarget {
    Uniform,
    Perturbed,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// Object-world spec; the default 9x5 world when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Target policy file.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Target used when no file is given.
    #[arg(long, value_enum, default_value_t = DefaultTarget::Uniform)]
    default_target: DefaultTarget,
    /// Feature file; the built-in two-feature model when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Overrides the spec's slip probability.
    #[arg(long)]
    slip: Option<f64>,
    /// Seed for the perturbed default target.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trajectory counts for the accuracy experiment.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 50, 100, 500])]
    counts: Vec<usize>,
    /// Simulation seeds; 0 to 19 when omitted.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Lower reward bounds swept by the cost-curve experiment.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-3.0, -2.5, -2.0, -1.5, -1.0])]
    r_min: Vec<f64>,
    /// Longest simulated trajectory.
    #[arg(long, default_value_t = 200)]
    max_len: usize,
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D, Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_mdp(path: &Path) -> Result<Mdp<f64>, Failure> {
    read_json::<MdpDoc<f64>>(path)?
        .into_mdp()
        .map_err(|e| Failure::from(e).context(path))
}

fn load_policy(path: &Path, mdp: &Mdp<f64>) -> Result<StochasticPolicy<f64>, Failure> {
    read_json::<PolicyDoc<f64>>(path)?
        .into_policy(mdp.n_states(), mdp.n_actions())
        .map_err(|e| Failure::from(e).context(path))
}

fn load_features(path: &Path) -> Result<(FeatureModel<f64>, RewardBounds<f64>), Failure> {
    read_json::<FeatureDoc<f64>>(path)?
        .into_model()
        .map_err(|e| Failure::from(e).context(path))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(mut w: Box<dyn Write>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::from(Error::Io(e)))
}

fn require_json(format: Format, command: &str) -> Result<(), Failure> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(Failure::usage(format!("{command} supports only --format json"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    cli.numeric.check()?;
    let opts = cli.numeric;
    match cli.command {
        Command::Solve { mdp } => {
            let mdp = load_mdp(&mdp)?;
            let sol = mce_policy(&mdp, &opts.solver())?;
            let mut w = open_out(&cli.out)?;
            match cli.format {
                Format::Json => write_json(&mut w, &MceDoc::from_solution(&sol))?,
                Format::Csv => {
                    let mut csv = csv_rows(&mut w, &["state", "action", "prob", "q"])?;
                    for (s, a, q) in sol.q.iter() {
                        csv.row(&[s.to_string(), a.to_string(), real(sol.policy.prob(s, a)), real(q)])?;
                    }
                }
            }
            finish(w)
        }
        Command::Advance { mdp, target, beta } => {
            require_json(cli.format, "advance")?;
            let mdp = load_mdp(&mdp)?;
            let target = load_policy(&target, &mdp)?;
            let beta = match beta {
                Some(p) => read_json::<BetaDoc<f64>>(&p)?.into_vec(),
                None => vec![0.0; mdp.n_states()],
            };
            let adv = opts.advancement();
            let sol = advancement_delta_q(&mdp, &target, &beta, &adv)?;
            let report = verify_transformation(&mdp, &sol, adv.verify_tolerance, &adv.solver)?;
            let mut w = open_out(&cli.out)?;
            write_json(&mut w, &AdvancementDoc::from_solution(&sol, Some(report)))?;
            finish(w)?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::verification(report.max_deviation, adv.verify_tolerance))
            }
        }
        Command::Mincost {
            mdp,
            target,
            features,
            trajectories,
            fallback,
            model_out,
        } => {
            require_json(cli.format, "mincost")?;
            let base = load_mdp(&mdp)?;
            let target = load_policy(&target, &base)?;
            let (features, bounds) = load_features(&features)?;
            let mc = opts.mincost();
            let (solution, verification) = match trajectories {
                None => {
                    let sol = min_reward_solution_with_bounds(&base, &target, &features, &bounds, &mc)?;
                    let report = verify_transformation(
                        &base,
                        &sol.advancement,
                        mc.advancement.verify_tolerance,
                        &mc.advancement.solver,
                    )?;
                    (sol, Some(report))
                }
                Some(path) => {
                    let file = File::open(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                    let data =
                        read_trajectories::<f64>(BufReader::new(file)).map_err(|e| Failure::from(e).context(&path))?;
                    let model = estimate_transitions(&data, base.n_states(), base.n_actions())?;
                    if let Some(p) = &model_out {
                        let mut w = open_out(&Some(p.clone()))?;
                        write_json(&mut w, &EmpiricalModelDoc::from_model(&model, &base.terminals()))?;
                        finish(w)?;
                    }
                    let estimated = model.to_mdp(&ModelSkeleton::of(&base), fallback.into())?;
                    let sol = min_reward_solution_with_bounds(&estimated, &target, &features, &bounds, &mc)?;
                    (sol, None)
                }
            };
            let mut w = open_out(&cli.out)?;
            write_json(&mut w, &MinCostDoc::from_solution(&solution, verification))?;
            finish(w)
        }
        Command::Simulate {
            mdp,
            target,
            n,
            max_len,
            seed,
        } => {
            require_json(cli.format, "simulate")?;
            let mdp = load_mdp(&mdp)?;
            let policy = match target {
                Some(p) => load_policy(&p, &mdp)?,
                None => mce_policy(&mdp, &opts.solver())?.policy,
            };
            let data = simulate(&mdp, &policy, n, seed, max_len);
            let mut w = open_out(&cli.out)?;
            write_trajectories(&mut w, &data)?;
            finish(w)
        }
        Command::Experiment(args) => run_experiment(args, cli.format, &cli.out, &opts),
    }
}

fn run_experiment(
    args: ExperimentArgs,
    format: Format,
    out: &Option<PathBuf>,
    opts: &NumericArgs,
) -> Result<(), Failure> {
    let mut spec = match &args.spec {
        Some(p) => read_json::<ObjectWorldSpec>(p)?,
        None => ObjectWorldSpec::default(),
    };
    if let Some(slip) = args.slip {
        spec.slip = slip;
    }
    let mdp = build_object_world::<f64>(&spec)?;
    let target = match (&args.target, args.default_target) {
        (Some(p), _) => load_policy(p, &mdp)?,
        (None, DefaultTarget::Uniform) => StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions()),
        (None, DefaultTarget::Perturbed) => perturbed_mce_target(&mdp, 1.0, args.seed, &opts.solver())?,
    };
    let (features, bounds) = match &args.features {
        Some(p) => load_features(p)?,
        None => {
            let f = default_features();
            let b = RewardBounds::from_features(&f);
            (f, b)
        }
    };
    let mut w = open_out(out)?;
    match args.name {
        ExperimentName::Accuracy => {
            let seeds = if args.seeds.is_empty() {
                (0..20).collect()
            } else {
                args.seeds
            };
            let options = ExperimentOptions {
                mincost: opts.mincost(),
                max_len: args.max_len,
                fallback: Fallback::UniformSuccessor,
            };
            let rows = run_accuracy_experiment(&spec, &target, &features, &bounds, &args.counts, &seeds, &options)?;
            match format {
                Format::Csv => write_accuracy_csv(&mut w, &rows)?,
                Format::Json => {
                    let doc: Vec<_> = rows
                        .iter()
                        .map(|r| (r.count, r.seed, r.errors.map(|e| e.sup_err), r.errors.map(|e| e.mae)))
                        .collect();
                    write_json(&mut w, &doc)?;
                }
            }
        }
        ExperimentName::CostCurve => {
            let rows = run_cost_curve_experiment(&spec, &target, &features, &args.r_min, &opts.mincost())?;
            match format {
                Format::Csv => write_cost_curve_csv(&mut w, &rows)?,
                Format::Json => {
                    let doc: Vec<_> = rows
                        .iter()
                        .map(|r| (r.r_min, r.solved.map(|p| p.objective), r.solved.map(|p| p.total_cost)))
                        .collect();
                    write_json(&mut w, &doc)?;
                }
            }
        }
    }
    finish(w)
}

fn real(x: f64) -> String {
    reward_advancement::io::format_real(x)
}

struct CsvRows<'a, W: Write> {
    w: &'a mut W,
}

impl<W: Write> CsvRows<'_, W> {
    fn row(&mut self, fields: &[String]) -> Result<(), Failure> {
        writeln!(self.w, "{}", fields.join(",")).map_err(|e| Failure::from(Error::Io(e)))
    }
}

fn csv_rows<'a, W: Write>(w: &'a mut W, header: &[&str]) -> Result<CsvRows<'a, W>, Failure> {
    writeln!(w, "{}", header.join(",")).map_err(|e| Failure::from(Error::Io(e)))?;
    Ok(CsvRows { w })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("rewadv: {failure}");
            ExitCode::from(failure.code)
        }
    }
}

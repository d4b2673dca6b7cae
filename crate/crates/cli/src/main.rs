use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use sharppeak::coupling::Theta;
use sharppeak::ModelParams;
use sharppeak_cli::{
    error_exit_code, run, status_exit_code, DiscoveryConfig, ExactConfig, ExperimentConfig, Format, HittingConfig,
    PhaseDiagramConfig, Process, PsiConfig, Range, RunConfig, SimulateConfig, VerifyRunConfig,
};

/// Wright–Fisher dynamics on the sharp-peak landscape: exact kernels,
/// couplings, quasipotentials and discovery times.
#[derive(Parser, Debug)]
#[command(name = "sharppeak", version)]
struct Cli {
    /// Seed of the random streams [default: 0, or the seed stored in --config]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    /// Run the experiment described by a JSON config (as embedded in every
    /// JSON result) instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("rate").required(true).args(["q", "a"])))]
struct ModelArgs {
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    kappa: usize,
    /// Per-locus mutation probability.
    #[arg(long)]
    q: Option<f64>,
    /// Mutation intensity a = ℓq.
    #[arg(long)]
    a: Option<f64>,
}

impl ModelArgs {
    fn params(&self) -> sharppeak::Result<ModelParams> {
        match (self.q, self.a) {
            (Some(q), _) => ModelParams::new(self.sigma, self.ell, self.m, self.kappa, q),
            (None, Some(a)) => ModelParams::from_intensity(self.sigma, self.ell, self.m, self.kappa, a),
            (None, None) => unreachable!("clap requires one of --q, --a"),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ThetaArg {
    /// Background pushed to class ℓ.
    Lower,
    /// Background pushed to class 1.
    Upper,
}

impl From<ThetaArg> for Theta {
    fn from(t: ThetaArg) -> Self {
        match t {
            ThetaArg::Lower => Theta::Lower,
            ThetaArg::Upper => Theta::Upper,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProcessArg {
    Occupancy,
    Sandwich,
    TwoType,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ψ(a) by grid shortest paths, cross-checked against the path formula.
    Psi {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = sharppeak::rate::DEFAULT_GRID)]
        grid: usize,
    },
    /// Sweep (a, α) and classify each point against α ψ(a) = ln κ.
    PhaseDiagram {
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2)]
        kappa: usize,
        /// min:max:steps
        #[arg(long, value_parser = Range::parse)]
        a_range: Range,
        /// min:max:steps
        #[arg(long, value_parser = Range::parse)]
        alpha_range: Range,
        #[arg(long, default_value_t = 500)]
        grid: usize,
    },
    /// Exact two-type chain: hitting times and occupation ratios, or the kernel.
    Exact {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "upper")]
        theta: ThetaArg,
        /// Dump the transition kernel.
        #[arg(long)]
        kernel: bool,
        /// Kernel as log-probabilities (implies --kernel).
        #[arg(long)]
        log_space: bool,
    },
    /// Trajectory of the occupancy chain, the sandwich, or the two-type chain.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "occupancy")]
        process: ProcessArg,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Occupancy counts o(0),…,o(ℓ), comma separated.
        #[arg(long, value_delimiter = ',')]
        start: Option<Vec<usize>>,
        /// Initial master count of the two-type chain.
        #[arg(long)]
        z0: Option<usize>,
        #[arg(long, value_enum, default_value = "upper")]
        theta: ThetaArg,
    },
    /// Property battery; exits with status 3 if any check fails.
    Verify {
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        kappa: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Monte Carlo estimate of the discovery time of the master sequence.
    Discovery {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long)]
        horizon: Option<u64>,
        /// Class every chromosome starts in [default: ℓ]
        #[arg(long)]
        start_class: Option<usize>,
    },
    /// Expected hitting time of a set of classes by one mutating chromosome.
    Hitting {
        #[arg(long)]
        ell: usize,
        #[arg(long, default_value_t = 2)]
        kappa: usize,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        from: usize,
        /// Target classes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        target: Vec<usize>,
    },
}

fn build(command: Command) -> sharppeak::Result<RunConfig> {
    Ok(match command {
        Command::Psi { a, sigma, grid } => RunConfig::Psi(PsiConfig { a, sigma, grid }),
        Command::PhaseDiagram {
            sigma,
            kappa,
            a_range,
            alpha_range,
            grid,
        } => RunConfig::PhaseDiagram(PhaseDiagramConfig {
            sigma,
            kappa,
            a: a_range,
            alpha: alpha_range,
            grid,
        }),
        Command::Exact {
            model,
            theta,
            kernel,
            log_space,
        } => RunConfig::Exact(ExactConfig {
            params: model.params()?,
            theta: theta.into(),
            kernel: kernel || log_space,
            log_space,
        }),
        Command::Simulate {
            model,
            process,
            steps,
            start,
            z0,
            theta,
        } => RunConfig::Simulate(SimulateConfig {
            params: model.params()?,
            process: match process {
                ProcessArg::Occupancy => Process::Occupancy,
                ProcessArg::Sandwich => Process::Sandwich,
                ProcessArg::TwoType => Process::TwoType,
            },
            steps,
            start,
            z0,
            theta: theta.into(),
        }),
        Command::Verify {
            sigma,
            ell,
            m,
            kappa,
            q,
            trials,
        } => {
            let d = VerifyRunConfig::default();
            let p = d.params;
            RunConfig::Verify(VerifyRunConfig {
                params: ModelParams::new(
                    sigma.unwrap_or(p.sigma()),
                    ell.unwrap_or(p.ell()),
                    m.unwrap_or(p.m()),
                    kappa.unwrap_or(p.kappa()),
                    q.unwrap_or(p.q()),
                )?,
                trials: trials.unwrap_or(d.trials),
            })
        }
        Command::Discovery {
            model,
            replicas,
            horizon,
            start_class,
        } => RunConfig::Discovery(DiscoveryConfig {
            params: model.params()?,
            replicas,
            horizon,
            start_class,
        }),
        Command::Hitting {
            ell,
            kappa,
            q,
            from,
            target,
        } => RunConfig::Hitting(HittingConfig {
            ell,
            kappa,
            q,
            from,
            target,
        }),
    })
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
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
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return usage(e);
        }
    }

    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => return usage("give either --config or a subcommand, not both"),
        (None, None) => return usage("a subcommand or --config is required (see --help)"),
        (Some(path), None) => {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => return usage(format!("{}: {e}", path.display())),
            };
            match serde_json::from_str::<ExperimentConfig>(&text) {
                Ok(mut c) => {
                    if let Some(seed) = cli.seed {
                        c.seed = seed;
                    }
                    c
                }
                Err(e) => return usage(format!("{}: {e}", path.display())),
            }
        }
        (None, Some(command)) => match build(command) {
            Ok(run) => ExperimentConfig {
                seed: cli.seed.unwrap_or(0),
                run,
            },
            Err(e) => return usage(e),
        },
    };

    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(error_exit_code(&e));
        }
    };
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        output.default_format()
    };
    let text = output.render(format);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(status_exit_code(output.record.status))
}

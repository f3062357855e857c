use bolt_tamp::belief::BeliefState;
use bolt_tamp::config::FileConfig;
use bolt_tamp::executor::{run_baseline_episode, run_episode};
use bolt_tamp::harness::{
    bolt_domain, bolt_problem, calibrate, emit_csv, emit_plot, episode_seed, generate_scene,
    run_sweep, ExperimentConfig, Method, Mode, PlotKind,
};
use bolt_tamp::pddl::{parse_domain, parse_problem};
use bolt_tamp::planner::plan;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_EXPERIMENT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "bolt-tamp",
    about = "Neurosymbolic task-and-motion planning for robotic bolt disassembly"
)]
struct Cli {
    /// Optional TOML config file; built-in defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a domain and problem and print the plan from the initial belief.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Repair unbalanced parentheses and shorthand keywords.
        #[arg(long)]
        lenient: bool,
    },
    /// Run a single episode on a randomly generated scene.
    Run {
        /// Pose noise std dev in mm.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = Mode::NoObstacles)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Method::Neurosymbolic)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the per-step trace before the episode record.
        #[arg(long)]
        trace: bool,
    },
    /// Run the full sweep for both methods; write CSV tables and SVG plots.
    Sweep {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Override the config file's master seed.
        #[arg(long)]
        master_seed: Option<u64>,
    },
    /// Report grounder argmax accuracies over labeled scenes.
    Calibrate {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<FileConfig, String> {
    match path {
        Some(p) => FileConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(FileConfig::default()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; anything else is usage
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match load_config(cli.config.as_ref()) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CommandError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CommandError::Experiment(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_EXPERIMENT)
        }
    }
}

enum CommandError {
    Usage(String),
    Experiment(String),
}

fn run(command: Command, cfg: FileConfig) -> Result<(), CommandError> {
    match command {
        Command::Plan {
            domain,
            problem,
            lenient,
        } => {
            let dtext = std::fs::read_to_string(&domain)
                .map_err(|e| CommandError::Usage(format!("{}: {e}", domain.display())))?;
            let ptext = std::fs::read_to_string(&problem)
                .map_err(|e| CommandError::Usage(format!("{}: {e}", problem.display())))?;
            let dom = parse_domain(&dtext, lenient)
                .map_err(|e| CommandError::Usage(format!("domain: {e}")))?;
            let prob = parse_problem(&ptext, &dom, lenient)
                .map_err(|e| CommandError::Usage(format!("problem: {e}")))?;
            let s0 = BeliefState::from_init(&prob.init);
            let found = plan(&dom, &s0, &prob.goal, &cfg.planner)
                .map_err(|e| CommandError::Experiment(e.to_string()))?;
            println!(
                "plan: [{}] likelihood={:.6}",
                found.steps.join(", "),
                found.likelihood
            );
            Ok(())
        }
        Command::Run {
            sigma,
            mode,
            method,
            seed,
            trace,
        } => {
            if !(sigma > 0.0) {
                return Err(CommandError::Usage("sigma must be > 0".into()));
            }
            let stack = cfg.stack();
            // same derivation as sweep episode 0 of a single-sigma list
            let episode = episode_seed(seed, method, mode, 0, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(episode);
            let world = generate_scene(sigma, mode, &stack.world, &mut rng);
            let result = match method {
                Method::Baseline => run_baseline_episode(world, &stack, episode ^ 1),
                Method::Neurosymbolic => {
                    let dom = bolt_domain();
                    let prob = bolt_problem(&dom);
                    run_episode(&dom, &prob, world, &stack, episode ^ 1)
                }
            };
            if trace {
                for record in &result.trace {
                    println!("{record}");
                }
            }
            println!("{result}");
            Ok(())
        }
        Command::Sweep {
            out_dir,
            master_seed,
        } => {
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CommandError::Usage(format!("{}: {e}", out_dir.display())))?;
            let mut exp = cfg.experiment();
            if let Some(seed) = master_seed {
                exp.master_seed = seed;
            }
            let io_err =
                |e: std::io::Error| CommandError::Experiment(format!("writing results: {e}"));
            let mut results = Vec::new();
            for method in [Method::Neurosymbolic, Method::Baseline] {
                let run_cfg = ExperimentConfig { method, ..exp.clone() };
                let result = run_sweep(&run_cfg);
                let path = out_dir.join(format!("{}_{}.csv", exp.mode, method));
                emit_csv(&result, &path).map_err(io_err)?;
                println!("wrote {}", path.display());
                results.push(result);
            }
            for (kind, stem) in [(PlotKind::SuccessRate, "sr"), (PlotKind::MeanSteps, "steps")] {
                let path = out_dir.join(format!("{}_{stem}.svg", exp.mode));
                emit_plot(&results[0], &results[1], kind, &path).map_err(io_err)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Calibrate { samples, seed } => {
            if samples == 0 {
                return Err(CommandError::Usage("samples must be >= 1".into()));
            }
            let report = calibrate(samples, seed, &cfg.world, &cfg.grounder);
            println!("{report}");
            let ok = (0.96..=1.0).contains(&report.aim_accuracy)
                && (0.94..=0.98).contains(&report.clear_accuracy);
            if !ok {
                return Err(CommandError::Experiment(
                    "grounder accuracy outside the calibration targets".into(),
                ));
            }
            Ok(())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtraj::config::RunConfig;
use qtraj::io::{save_snapshot, write_file};
use qtraj::rng::stream;
use qtraj::sse::{SseIntegrator, WienerPath};
use qtraj::stats::{configure_threads, convergence_study, ensemble_run};
use qtraj::verify::run_invariant_suite;
use qtraj::Error;

/// Exit code when an acceptance-tagged check fails.
const ACCEPTANCE_FAILURE: u8 = 4;

/// Seed for `verify` when no configuration is given.
const VERIFY_SEED: u64 = 20240611;

#[derive(Parser)]
#[command(name = "qtraj", version, about = "Repeated weak measurement and its stochastic Schrödinger limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set sse.dt=5e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print κ and θ of the configured detector profiles.
    Kappa(ConfigArgs),
    /// Run one discrete measurement trajectory.
    SimulateDiscrete(ConfigArgs),
    /// Run one SSE trajectory.
    SimulateSse(ConfigArgs),
    /// Run `ensemble_size` trajectories and write checkpoint statistics.
    Ensemble(ConfigArgs),
    /// Compare discrete and SSE ensembles along a ladder of step sizes.
    Converge(ConfigArgs),
    /// Run the invariant suite.
    Verify {
        /// Also check the profiles of this configuration and take its seed.
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(a: &ConfigArgs) -> qtraj::Result<RunConfig> {
    RunConfig::load(&a.config, &a.set)
}

/// Print small values as exact zeros so `-0.000000` never appears.
fn fixed6(v: f64) -> String {
    format!("{:.6}", if v.abs() < 5e-7 { 0.0 } else { v })
}

fn run(cmd: Command) -> qtraj::Result<u8> {
    configure_threads()?;
    match cmd {
        Command::Kappa(a) => {
            let cfg = load(&a)?;
            let (chi, lambda) = cfg.profiles()?;
            println!("kappa={}", fixed6(chi.kappa()?));
            println!("theta={}", fixed6(chi.theta()?));
            println!("kappa_p={}", fixed6(lambda.kappa()?));
            println!("theta_p={}", fixed6(lambda.theta()?));
        }
        Command::SimulateDiscrete(a) => {
            let cfg = load(&a)?;
            let (mut sim, n_steps) = cfg.discrete_simulator()?;
            let psi0 = cfg.initial_state()?;
            let (traj, record, last) = sim.run(&psi0, n_steps, &mut stream(cfg.seed, 0))?;
            write_file(&cfg.output_path("trajectory.csv"), |w| traj.write_csv(w))?;
            write_file(&cfg.output_path("measurements.csv"), |w| record.write_csv(w))?;
            save_snapshot(&last, &cfg.output_path("final_state.bin"))?;
            log::info!("wrote {} checkpoints to {}", traj.len(), cfg.output_path("").display());
        }
        Command::SimulateSse(a) => {
            let cfg = load(&a)?;
            let sse = cfg.sse_config()?;
            let psi0 = cfg.initial_state()?;
            let path = WienerPath::generate(sse.n_steps, sse.dt, 0, &mut stream(cfg.seed, 0));
            let (traj, last) = SseIntegrator::new(&cfg.grid, &sse)?.run(&psi0, &path)?;
            write_file(&cfg.output_path("trajectory.csv"), |w| traj.write_csv(w))?;
            write_file(&cfg.output_path("noise.csv"), |w| path.write_csv(w))?;
            save_snapshot(&last, &cfg.output_path("final_state.bin"))?;
            log::info!("wrote {} checkpoints to {}", traj.len(), cfg.output_path("").display());
        }
        Command::Ensemble(a) => {
            let cfg = load(&a)?;
            let spec = cfg.ensemble_spec()?;
            let stats = ensemble_run(&spec, cfg.ensemble_size, cfg.seed)?;
            write_file(&cfg.output_path("ensemble.csv"), |w| stats.write_csv(w))?;
            log::info!("M={} checkpoints={}", stats.m, stats.times.len());
        }
        Command::Converge(a) => {
            let cfg = load(&a)?;
            let report = convergence_study(&cfg.convergence_spec()?)?;
            write_file(&cfg.output_path("convergence.csv"), |w| report.write_csv(w))?;
            let summary = report.summary();
            write_file(&cfg.output_path("convergence.txt"), |w| {
                use std::io::Write;
                w.write_all(summary.as_bytes())
            })?;
            print!("{summary}");
            if !report.passes() {
                return Ok(ACCEPTANCE_FAILURE);
            }
        }
        Command::Verify { config, set } => {
            let (extra, seed) = match config {
                Some(path) => {
                    let cfg = RunConfig::load(&path, &set)?;
                    let (chi, lambda) = cfg.profiles()?;
                    (vec![("configured q".to_string(), chi), ("configured p".to_string(), lambda)], cfg.seed)
                }
                None if !set.is_empty() => return Err(Error::config("--set needs --config")),
                None => (Vec::new(), VERIFY_SEED),
            };
            let report = run_invariant_suite(&extra, seed)?;
            println!("{report}");
            if !report.passed() {
                return Ok(ACCEPTANCE_FAILURE);
            }
        }
    }
    Ok(0)
}

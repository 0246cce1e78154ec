use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dampwave::damping::DampingModel;
use dampwave::lifespan::Regime;
use dampwave::ode_lab::OdeKind;
use dampwave_cli::artifacts::Manifest;
use dampwave_cli::config::check_decreasing;
use dampwave_cli::stages::{self, manifest_path_for, timed, StageOutput};
use dampwave_cli::{configure_workers, parse_config, parse_list, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Lifespan experiments for damped semilinear waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate b, g, g', G, Γ on [0, tmax]
    Aux {
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Integrate one problem; writes the trajectory and snapshots
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// overrides output.dir
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Lifespans over a list of ε
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// comma-separated, strictly decreasing; overrides problem.epsilons
        #[arg(long)]
        epsilons: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit a sweep CSV in a regime's coordinates
    Fit {
        #[arg(long)]
        regime: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// nonlinearity power, needed by the critical regimes
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Evaluate the heat-kernel identity on stored snapshots
    Identity {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        times: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blow-up times of the comparison ODEs
    Odelab {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        epsilons: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Execute the stages listed in run.stages
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<(ExperimentConfig, String), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::MissingInput(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    Ok((cfg, text))
}

/// Runs a single-stage command and writes its manifest.
fn single(
    command: &str,
    key: &str,
    deterministic: bool,
    manifest_path: &Path,
    f: impl FnOnce() -> Result<StageOutput, CliError>,
) -> Result<StageOutput, CliError> {
    let mut manifest = Manifest::new(command, key, deterministic);
    let result = timed(&mut manifest, command, f);
    manifest.save(manifest_path)?;
    result
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg_key = args.join(" ");
    match cli.command {
        Command::Aux { beta, tmax, samples, tol, out, svg } => {
            if !(-1.0..1.0).contains(&beta) {
                return Err(CliError::Usage(format!("beta = {beta} outside the admissible range [-1, 1)")));
            }
            let model = DampingModel::new(beta)?;
            let o = single("aux", &arg_key, true, &manifest_path_for(&out), || {
                stages::aux_stage(model, tmax, samples, tol, &out, svg.as_deref())
            })?;
            println!("aux: {}", o.summary);
        }
        Command::Simulate { config, out_dir } => {
            let (cfg, text) = load_config(&config)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let o = single("simulate", &text, cfg.output.deterministic, &dir.join("manifest.json"), || {
                stages::simulate_stage(&cfg, &text, &dir)
            })?;
            println!("simulate: {}", o.summary);
        }
        Command::Sweep { config, epsilons, out, svg } => {
            let (cfg, text) = load_config(&config)?;
            let eps = match epsilons {
                Some(list) => parse_list(&list)?,
                None => cfg
                    .problem
                    .as_ref()
                    .and_then(|p| p.epsilons.clone())
                    .ok_or_else(|| CliError::Usage("no --epsilons and no problem.epsilons".into()))?,
            };
            check_decreasing(&eps, "--epsilons")
                .map_err(|v| CliError::Config(dampwave_cli::ConfigError::Validation(v)))?;
            let key = format!("{text}\n# epsilons {eps:?}");
            let o = single("sweep", &key, cfg.output.deterministic, &manifest_path_for(&out), || {
                stages::sweep_stage(&cfg, &eps, &out, svg.as_deref())
            })?;
            println!("sweep: {}", o.summary);
        }
        Command::Fit { regime, input, out, p, svg } => {
            let regime = Regime::parse(&regime).ok_or_else(|| {
                CliError::Usage(format!("regime {regime:?} is not SubcriticalPoly, CriticalExp or CriticalDoubleExp"))
            })?;
            let o = single("fit", &arg_key, true, &manifest_path_for(&out), || {
                stages::fit_stage(regime, p, &input, &out, svg.as_deref())
            })?;
            println!("fit: {}", o.summary);
        }
        Command::Identity { run, times, out } => {
            let times = parse_list(&times)?;
            if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) {
                return Err(CliError::Usage("--times must list nonnegative times".into()));
            }
            let o = single("identity", &arg_key, true, &manifest_path_for(&out), || {
                stages::identity_stage(&run, &times, &out)
            })?;
            println!("identity: {}", o.summary);
        }
        Command::Odelab { kind, beta, p, epsilons, out, svg } => {
            let kind = OdeKind::parse(&kind)
                .ok_or_else(|| CliError::Usage(format!("kind {kind:?} must be lemmaA1, lemmaA2 or lizhou")))?;
            let eps = parse_list(&epsilons)?;
            check_decreasing(&eps, "--epsilons")
                .map_err(|v| CliError::Config(dampwave_cli::ConfigError::Validation(v)))?;
            let o = single("odelab", &arg_key, true, &manifest_path_for(&out), || {
                stages::odelab_stage(kind, beta, p, &eps, &out, svg.as_deref())
            })?;
            println!("odelab: {}", o.summary);
        }
        Command::Run { config } => {
            let (cfg, text) = load_config(&config)?;
            if cfg.run.is_none() {
                return Err(CliError::Usage(format!("{} has no [run] section", config.display())));
            }
            for (stage, o) in stages::run_pipeline(&cfg, &text)? {
                println!("{stage}: {}", o.summary);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

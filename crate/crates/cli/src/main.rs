//! `semeq` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 the game did not
//! reach a verified equilibrium, 3 file-system error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semeq::config::{Format, ScenarioConfig};
use semeq::exec::Execution;
use semeq::experiment::{sweep, Axis};
use semeq::game::{run_game, verify_nash, GameConfig, GameOutcome, NashReport, Scheme};
use semeq::report::{write_json, write_sweep_file, write_trace_file, write_transceivers, RunSummary, SweepSummary};
use semeq::scenario::Scenario;
use semeq::Error;

#[derive(Parser)]
#[command(name = "semeq", version, about = "Semantic channel equalization game over MIMO interference channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play the power-allocation game on one seed and write trace, summary and transceivers.
    Run(GameArgs),
    /// Sweep interferer spacing or compression over the configured methods and seeds.
    Sweep(SweepArgs),
    /// Play the game and check the final state against unilateral deviations.
    Verify(GameArgs),
    /// Print the validated configuration with all defaults filled in.
    EchoConfig(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct GameArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Scenario seed; defaults to the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Update scheme: gauss-seidel or jacobi.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Maximum number of game iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Output directory; defaults to `output.directory` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Sweep axis: xi or alpha.
    #[arg(long)]
    axis: Axis,
    /// Restrict the sweep to a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.directory` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    NotConverged(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NotConverged(_) => 2,
            Failure::Lib(Error::Io { .. }) => 3,
            Failure::Lib(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
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
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Sweep(args) => sweep_command(&args),
        Command::Verify(args) => verify(&args),
        Command::EchoConfig(args) => ScenarioConfig::load(&args.config)
            .map(|cfg| print!("{}", cfg.to_toml()))
            .map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn execution() -> Execution {
    if cfg!(feature = "parallel") {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

struct Played {
    cfg: ScenarioConfig,
    seed: u64,
    scheme: Scheme,
    outcome: GameOutcome,
    nash: NashReport,
}

fn play(args: &GameArgs) -> Result<Played, Failure> {
    let mut cfg = ScenarioConfig::load(&args.config.config)?;
    if let Some(scheme) = args.scheme {
        cfg.game.scheme = scheme;
    }
    if let Some(iters) = args.iters {
        cfg.game.max_iterations = iters;
    }
    cfg.validate()?;
    let seed = match args.seed {
        Some(s) => s,
        None => *cfg
            .experiment
            .seeds
            .first()
            .ok_or_else(|| Failure::Usage("no --seed given and experiment.seeds is empty".into()))?,
    };
    let scheme = cfg.game.scheme;
    eprintln!("config {} seed {seed} scheme {}", cfg.hash(), scheme.name());
    let exec = execution();
    let scenario = Scenario::build(&cfg, seed, exec)?;
    let problem = scenario.problem()?;
    let game: &GameConfig = &cfg.game;
    let outcome = run_game(&problem, game, seed, exec)?;
    let nash = verify_nash(&problem, &outcome.states, game.ne_check_trials, game.ne_tolerance, seed)?;
    eprintln!(
        "{} after {} iteration(s), residual {:.3e}; equilibrium check {} (worst relative improvement {:.3e})",
        if outcome.trace.converged { "converged" } else { "stopped" },
        outcome.trace.iterations_used,
        outcome.trace.records.last().map_or(f64::NAN, |r| r.residual),
        if nash.is_ne { "passed" } else { "failed" },
        nash.worst_improvement
    );
    Ok(Played {
        cfg,
        seed,
        scheme,
        outcome,
        nash,
    })
}

fn verdict(p: &Played) -> Result<(), Failure> {
    if !p.outcome.trace.converged {
        return Err(Failure::NotConverged(format!(
            "the game did not converge within {} iteration(s)",
            p.cfg.game.max_iterations
        )));
    }
    if !p.nash.is_ne {
        return Err(Failure::NotConverged(format!(
            "the final state is not an equilibrium: a deviation improves a payoff by {:.3e} (tolerance {:.1e})",
            p.nash.worst_improvement, p.cfg.game.ne_tolerance
        )));
    }
    Ok(())
}

fn output_dir(out: &Option<PathBuf>, cfg: &ScenarioConfig) -> Result<PathBuf, Failure> {
    let dir = out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

fn run(args: &GameArgs) -> Result<(), Failure> {
    let p = play(args)?;
    let hash = p.cfg.hash();
    let dir = output_dir(&args.out, &p.cfg)?.join(format!("{}-seed{}", p.scheme.name(), p.seed));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    if p.cfg.output.formats.contains(&Format::Csv) {
        write_trace_file(&dir.join("trace.csv"), &p.outcome.trace, p.scheme, p.seed, &hash)?;
    }
    if p.cfg.output.formats.contains(&Format::Json) {
        let summary = RunSummary::new(&p.cfg, p.seed, p.scheme, &p.outcome.trace, Some(p.nash.clone()));
        write_json(&dir.join("summary.json"), &summary)?;
    }
    write_transceivers(&dir, &p.outcome.states, p.seed, &hash)?;
    eprintln!("wrote {}", dir.display());
    verdict(&p)
}

fn verify(args: &GameArgs) -> Result<(), Failure> {
    let p = play(args)?;
    for (l, r) in p.nash.players.iter().enumerate() {
        println!("player {l}: {r:?}");
    }
    println!(
        "equilibrium: {} (worst relative improvement {:.3e})",
        if p.nash.is_ne { "yes" } else { "no" },
        p.nash.worst_improvement
    );
    verdict(&p)
}

fn sweep_command(args: &SweepArgs) -> Result<(), Failure> {
    let cfg = ScenarioConfig::load(&args.config.config)?;
    let values = match args.axis {
        Axis::Xi => cfg.experiment.xi_values.clone(),
        Axis::Alpha => cfg.experiment.alpha_values.clone(),
    };
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => cfg.experiment.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(Failure::Usage("no --seed given and experiment.seeds is empty".into()));
    }
    let hash = cfg.hash();
    eprintln!(
        "config {hash}: {} sweep over {} value(s), {} method(s), {} seed(s)",
        args.axis.name(),
        values.len(),
        cfg.experiment.methods.len(),
        seeds.len()
    );
    let result = sweep(&cfg, args.axis, &values, &cfg.experiment.methods, &seeds, execution())?;
    let dir = output_dir(&args.out, &cfg)?;
    let stem = format!("sweep-{}", args.axis.name());
    if cfg.output.formats.contains(&Format::Csv) {
        write_sweep_file(&dir.join(format!("{stem}.csv")), &result, &hash)?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        write_json(&dir.join(format!("{stem}.json")), &SweepSummary::new(&cfg, &result))?;
    }
    eprintln!("wrote {}", dir.join(stem).display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Usage(String::new()).code(), 1);
        assert_eq!(Failure::NotConverged(String::new()).code(), 2);
        let io = Error::Io {
            path: PathBuf::from("x"),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(Failure::from(io).code(), 3);
        assert_eq!(Failure::from(Error::Domain("d".into())).code(), 1);
    }
}

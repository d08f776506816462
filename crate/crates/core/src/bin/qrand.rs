use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qrand::sampler::{build_ensemble, EnsembleKind, SeededStream};
use qrand::xcli::{run, save_ensemble, Command, ConfigFile, ExperimentConfig, Parameters};

/// Seeded experiments on randomizing maps, data hiding and locking.
#[derive(Debug, Parser)]
#[command(name = "qrand", version)]
struct Cli {
    /// Experiment to run; may come from the config file instead.
    command: Option<Command>,

    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, alias = "eps")]
    epsilon: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kind: Option<EnsembleKind>,

    /// Report path stem; `.json` and `.csv` are written next to it.
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Also save the `d`, `n`, `kind` ensemble drawn from `seed`.
    #[arg(long)]
    save_ensemble: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("qrand: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> qrand::Result<bool> {
    if let Some(threads) = std::env::var("QRAND_THREADS").ok().and_then(|v| v.parse().ok()) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| qrand::Error::Config(format!("QRAND_THREADS: {e}")))?;
    }
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let flags = Parameters {
        d: cli.d,
        n: cli.n,
        p: cli.p,
        epsilon: cli.epsilon,
        trials: cli.trials,
        restarts: cli.restarts,
        iterations: cli.iterations,
        states: cli.states,
        draws: cli.draws,
        seed: cli.seed,
        kind: cli.kind,
    };
    let config = ExperimentConfig::resolve(file, cli.command, flags, cli.output)?;

    if let Some(path) = &cli.save_ensemble {
        let prm = &config.parameters;
        let (d, n) = prm
            .d
            .zip(prm.n)
            .ok_or_else(|| qrand::Error::Config("--save-ensemble needs `d` and `n`".into()))?;
        let kind = prm.kind.unwrap_or(EnsembleKind::Haar);
        let stream = SeededStream::new(prm.seed.unwrap_or(0)).derive(0);
        save_ensemble(&build_ensemble(d, n, kind, &stream)?, path)?;
    }

    let report = run(&config)?;
    println!("{} ({:.2} s)", config.command, report.wall_clock_seconds);
    for (k, v) in &report.statistics {
        println!("  {k} = {v:.10e}");
    }
    for (k, v) in &report.flags {
        println!("  [{}] {k}", if *v { "pass" } else { "FAIL" });
    }
    if let Some(e) = &report.error {
        println!("  error: {e}");
    }
    Ok(report.passed())
}

//! Batch front-end: load a model config, run a computation, emit CSV/JSON
//! results with a metadata sidecar. Exit codes: 0 success, 2 validation
//! error, 3 numerical error.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "radqfi", version, about = "Radiation QFI of Markovian open systems")]
struct Cli {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Task override when the config file omits `task`:
    /// qfi-curve | rate | degenerate | haar | oracle-check | hks-check | btc-collapse.
    #[arg(long)]
    task: Option<String>,
    /// Output directory for results and the metadata sidecar.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and sampling (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = std::time::Instant::now();

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(task) = &cli.task {
        if cfg.task.is_none() {
            cfg.task = Some(task.clone());
        } else if cfg.task.as_deref() != Some(task.as_str()) {
            eprintln!(
                "error: --task {task} conflicts with task = {:?} in the config",
                cfg.task
            );
            return ExitCode::from(2);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let task = match cfg.task.clone() {
        Some(t) => t,
        None => {
            eprintln!("error: no task given (config `task` or --task)");
            return ExitCode::from(2);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(2);
    }

    match tasks::run(&task, &cfg, &cli.out) {
        Ok(result_file) => {
            let meta = serde_json::json!({
                "task": task,
                "config": toml::to_string_pretty(&cfg).unwrap_or_default(),
                "seed": cfg.seed,
                "version": env!("CARGO_PKG_VERSION"),
                "wall_time_ms": started.elapsed().as_millis() as u64,
                "result_file": result_file,
            });
            let meta_path = cli.out.join(format!("{task}_meta.json"));
            if let Err(e) = std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap())
            {
                eprintln!("error: cannot write {}: {e}", meta_path.display());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(tasks::TaskError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(tasks::TaskError::Numerical(e)) => {
            eprintln!("numerical error: {e}");
            ExitCode::from(3)
        }
    }
}

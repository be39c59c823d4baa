use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flatstep::harness::{parse_config, run_exit_code, ConfigSource, Experiment, HarnessError};

/// Seeded experiments for multistep and calibrated splitting methods.
///
/// Run `flatstep list` for the experiments and their parameters.
/// FLATSTEP_THREADS sets the worker thread count.
#[derive(Parser, Debug)]
#[command(name = "flatstep", version)]
struct Cli {
    /// Experiment name, or `list`.
    experiment: String,
    /// JSON config file: {"experiment", "seed", "out_path", "params"}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; writes <out>.csv and <out>.json.
    #[arg(long)]
    out: Option<String>,
    /// Parameter override, repeatable.
    #[arg(long = "param", short = 'p', value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn list() {
    for e in Experiment::ALL {
        println!("{}  [{}]  {}", e.name(), e.schema(), e.description());
        println!("    columns: {}", e.columns().join(","));
        for p in e.params() {
            let default = p.default.map_or("required".to_string(), |d| format!("default {d}"));
            println!("    {:<14} {:<8} {:<22} {}", p.name, format!("{:?}", p.kind).to_lowercase(), default, p.help);
        }
    }
}

fn fail(e: HarnessError, experiment: Option<&str>) -> ExitCode {
    eprintln!("{}", e.record(experiment));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.experiment == "list" {
        list();
        return ExitCode::SUCCESS;
    }
    if let Ok(v) = std::env::var("FLATSTEP_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return fail(HarnessError::Validation(format!("FLATSTEP_THREADS must be a positive integer, got '{v}'")), None),
        }
    }
    let src = ConfigSource {
        file: cli.config,
        experiment: Some(cli.experiment.clone()),
        seed: cli.seed,
        out: cli.out,
        params: cli.params,
    };
    match parse_config(&src) {
        Ok(cfg) => {
            let code = run_exit_code(&cfg);
            if code == 0 {
                println!("{}", cfg.csv_path().display());
                println!("{}", cfg.json_path().display());
            }
            ExitCode::from(code as u8)
        }
        Err(e) => fail(e, Some(&cli.experiment)),
    }
}

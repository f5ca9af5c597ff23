//! coherentcast: coherent hierarchical probabilistic demand forecasting.
//!
//! Exit codes: 0 success, 2 usage/input error, 3 numerical failure.

use coherentcast_core::pipeline::{self, RunConfig, SynthSpec};
use coherentcast_core::Error;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "usage: coherentcast <command> --config <path> [options]

commands:
  ingest              aggregate sessions into hourly series and covariates
  train-base          train one probabilistic model per series
  forecast            sample scenario files for the configured partition
  train-reconciler    fit the reconciliation weight (dcl | coef | id)
  evaluate            score original and reconciled test scenarios
  sweep-activations   train every r/g activation combination (depths 2-4)
  synth-data          write bundled synthetic input files

options:
  --config PATH           run configuration (key=value lines); required
                          except for synth-data
  --seed N                override the run seed
  --horizon {24,48,72,96} override the forecast horizon
  --weight-mode {dcl,coef,id}
  --scenarios M           override the scenario count
  --out DIR               override the output directory
  --partition NAME        forecast partition (train|val|test|dcl-train|dcl-val)

synth-data options:
  --out DIR    target directory (required)
  --days N     days of data (default 60)
  --seed N     generator seed (default 42)";

struct Cli {
    command: String,
    config: Option<PathBuf>,
    overrides: BTreeMap<String, String>,
    days: usize,
    synth_seed: u64,
    out: Option<PathBuf>,
}

fn parse_args(args: &[String]) -> Result<Cli, String> {
    if args.is_empty() {
        return Err("missing command".into());
    }
    let command = args[0].clone();
    let mut config = None;
    let mut overrides = BTreeMap::new();
    let mut days = 60usize;
    let mut synth_seed = 42u64;
    let mut out = None;
    let mut i = 1;
    let next = |i: &mut usize| -> Result<String, String> {
        *i += 1;
        args.get(*i)
            .cloned()
            .ok_or_else(|| format!("flag `{}` needs a value", args[*i - 1]))
    };
    while i < args.len() {
        match args[i].as_str() {
            "--config" => config = Some(PathBuf::from(next(&mut i)?)),
            "--seed" => {
                let v = next(&mut i)?;
                v.parse::<u64>().map_err(|e| format!("bad --seed: {e}"))?;
                synth_seed = v.parse().unwrap();
                overrides.insert("seed".into(), v);
            }
            "--horizon" => {
                let v = next(&mut i)?;
                overrides.insert("horizon".into(), v);
            }
            "--weight-mode" => {
                let v = next(&mut i)?;
                overrides.insert("weight_mode".into(), v);
            }
            "--scenarios" => {
                let v = next(&mut i)?;
                overrides.insert("scenarios".into(), v);
            }
            "--out" => {
                let v = next(&mut i)?;
                out = Some(PathBuf::from(v.clone()));
                overrides.insert("out_dir".into(), v);
            }
            "--partition" => {
                let v = next(&mut i)?;
                overrides.insert("forecast_partition".into(), v);
            }
            "--days" => {
                let v = next(&mut i)?;
                days = v.parse().map_err(|e| format!("bad --days: {e}"))?;
            }
            other => return Err(format!("unknown flag `{other}`")),
        }
        i += 1;
    }
    Ok(Cli {
        command,
        config,
        overrides,
        days,
        synth_seed,
        out,
    })
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    RunConfig::from_file(path, &cli.overrides)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match cli.command.as_str() {
        "ingest" => {
            let cfg = load_config(cli)?;
            let summary = pipeline::cmd_ingest(&cfg)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "ingested {} sessions into {} hourly rows across {} stations",
                summary.sessions, summary.hours, summary.stations
            );
            println!("wrote {}", cfg.out_dir.join("hourly.csv").display());
            println!("wrote {}", cfg.out_dir.join("features.csv").display());
            Ok(())
        }
        "train-base" => {
            let cfg = load_config(cli)?;
            let paths = pipeline::cmd_train_base(&cfg)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        "forecast" => {
            let cfg = load_config(cli)?;
            let paths = pipeline::cmd_forecast(&cfg)?;
            println!(
                "wrote {} scenario files under {}",
                paths.len(),
                cfg.out_dir.join("scenarios").display()
            );
            Ok(())
        }
        "train-reconciler" => {
            let cfg = load_config(cli)?;
            let path = pipeline::cmd_train_reconciler(&cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        "evaluate" => {
            let cfg = load_config(cli)?;
            let report = pipeline::cmd_evaluate(&cfg)?;
            println!("evaluated methods: {}", report.methods.join(", "));
            for (method, es) in &report.energy_score {
                println!("energy score [{method}]: {es:.6}");
            }
            println!("wrote {}", cfg.out_dir.join("report.json").display());
            Ok(())
        }
        "sweep-activations" => {
            let cfg = load_config(cli)?;
            let (report, cdf) = pipeline::cmd_sweep_activations(&cfg)?;
            println!("wrote {}", report.display());
            println!("wrote {}", cdf.display());
            Ok(())
        }
        "synth-data" => {
            let out = cli
                .out
                .clone()
                .ok_or_else(|| Error::Config("synth-data requires --out".into()))?;
            let spec = SynthSpec {
                days: cli.days,
                seed: cli.synth_seed,
                ..Default::default()
            };
            pipeline::synth::write_to(&spec, &out)?;
            println!(
                "wrote sessions.csv, weather.csv, holidays.txt under {}",
                out.display()
            );
            Ok(())
        }
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        println!("{USAGE}");
        return ExitCode::from(if args.is_empty() { 2 } else { 0 });
    }
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(msg) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Numerical(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

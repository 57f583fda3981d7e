use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interclear::cli::{
    cmd_validate, interchange_for, resolve_case, run_clear, write_outcome, MethodSel, RunConfig,
};
use interclear::baselines::run_single_area;

#[derive(Parser)]
#[command(name = "interclear", version, about = "Day-ahead clearing of interconnected markets")]
struct Cli {
    /// Worker threads for area subproblems (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Case file, or the name of a bundled case.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "INTERCLEAR_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Clear a case under one or all regimes and write results.
    Clear {
        #[command(flatten)]
        common: Common,
        /// single, uncoordinated, coordinated or all.
        #[arg(long)]
        method: Option<MethodSel>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a case file and print its statistics.
    Validate {
        #[arg(long)]
        case: PathBuf,
    },
    /// Derive an interchange schedule from a single-area run.
    DeriveInterchange {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> interclear::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if common.case.is_some() {
        cfg.case = common.case.clone();
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> interclear::Result<ExitCode> {
    match cli.command {
        Command::Validate { case } => {
            println!("{}", cmd_validate(&case)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Clear { common, method, seed } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            if seed.is_some() {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let case = resolve_case(cfg.case.as_ref().unwrap())?;
            let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let outcome = run_clear(&case, &cfg)?;
            write_outcome(&case, &outcome, &out)?;
            for r in outcome.runs() {
                let res = &r.result;
                println!(
                    "{:<14} {:>16.2}  {:>8.2}s  {}",
                    res.method.as_str(),
                    res.cost.total,
                    r.seconds,
                    res.cause.as_deref().unwrap_or("")
                );
            }
            if let Some(f) = outcome.savings_fraction() {
                println!("savings fraction {f:.4}");
            }
            Ok(if outcome.all_feasible() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::DeriveInterchange { common } => {
            let cfg = load_config(&common)?;
            cfg.validate()?;
            let case = resolve_case(cfg.case.as_ref().unwrap())?;
            let single = run_single_area(&case, &cfg.miqp.options())?;
            let ic = interchange_for(&case, &cfg.interchange, Some(&single))?;
            let text = serde_json::to_string_pretty(&ic).expect("schedule serializes") + "\n";
            match &cfg.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| interclear::Error::Io {
                        path: dir.display().to_string(),
                        source: e,
                    })?;
                    let path = dir.join("interchange.json");
                    std::fs::write(&path, text).map_err(|e| interclear::Error::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

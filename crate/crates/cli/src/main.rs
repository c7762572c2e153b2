mod config;
mod experiments;
mod output;
mod validate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use output::{ExperimentSummary, Row, Status, Summary, Value};

const EXIT_INVALID: u8 = 2;
const EXIT_FAILED: u8 = 3;
const THREADS_VAR: &str = "QKINLAB_THREADS";

#[derive(Parser)]
#[command(name = "qkinlab", version, about = "Mean-field and kinetic experiments on finite-dimensional many-particle models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a configuration without running it.
    Check { config: PathBuf },
    /// Run every experiment and write results.csv and summary.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "qkinlab-out")]
        out: PathBuf,
        /// Run despite validation errors.
        #[arg(long)]
        force: bool,
    },
    /// Print pass/fail tallies of a results directory.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Check { config } => check(&config),
        Command::Run { config, out, force } => run(&config, &out, force),
        Command::Report { dir } => report(&dir),
    };
    ExitCode::from(code)
}

fn load_and_validate(path: &Path) -> Result<(config::Config, bool), u8> {
    let cfg = config::load(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID
    })?;
    let diags = validate::validate(&cfg);
    for d in &diags {
        eprintln!("{d}");
    }
    Ok((cfg, validate::has_errors(&diags)))
}

fn check(path: &Path) -> u8 {
    match load_and_validate(path) {
        Ok((cfg, false)) => {
            println!("{}: {} experiment(s) ok", path.display(), cfg.experiments.len());
            0
        }
        Ok((_, true)) => EXIT_INVALID,
        Err(code) => code,
    }
}

fn threads() -> Result<usize, String> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v.parse().map_err(|_| format!("{THREADS_VAR} must be a positive integer, got {v:?}"))?;
            if n == 0 {
                return Err(format!("{THREADS_VAR} must be positive"));
            }
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
            Ok(n)
        }
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn run(path: &Path, out: &Path, force: bool) -> u8 {
    let (cfg, invalid) = match load_and_validate(path) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if cfg.experiments.is_empty() || (invalid && !force) {
        return EXIT_INVALID;
    }
    let threads = match threads() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_INVALID;
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut summaries = Vec::new();
    for (i, exp) in cfg.experiments.iter().enumerate() {
        let seed = config::experiment_seed(&cfg, i);
        let start = Instant::now();
        let mut exp_rows = vec![Row {
            experiment: exp.name.clone(),
            t: None,
            epsilon: None,
            quantity: "seed".into(),
            value: Value::Text(seed.to_string()),
            tolerance: None,
            status: Status::Info,
            source: "config::experiment_seed",
        }];
        match experiments::run(exp, seed, force) {
            Ok(r) => exp_rows.extend(r),
            Err(e) => {
                eprintln!("error [{}]: {e}", exp.name);
                exp_rows.push(Row {
                    experiment: exp.name.clone(),
                    t: None,
                    epsilon: None,
                    quantity: "error".into(),
                    value: Value::Text(e),
                    tolerance: None,
                    status: Status::Error,
                    source: "experiments::run",
                });
            }
        }
        let runtime = start.elapsed().as_secs_f64();
        let summary = ExperimentSummary::from_rows(&exp.name, exp.kind.as_str(), seed, &exp_rows, runtime);
        println!(
            "{} {}: {} check(s), {} failed, {} error(s) [{runtime:.2}s]",
            if summary.pass { "PASS" } else { "FAIL" },
            exp.name,
            summary.checks,
            summary.failed,
            summary.errors
        );
        summaries.push(summary);
        rows.extend(exp_rows);
    }

    let pass = summaries.iter().all(|s| s.pass);
    let versions = BTreeMap::from([("qkinlab", env!("CARGO_PKG_VERSION")), ("qkinlab-core", qkinlab::VERSION)]);
    let summary = Summary { tool: "qkinlab", versions, seed: cfg.seed, threads, pass, experiments: summaries, config: &cfg };
    let written = output::write_csv(&out.join(output::CSV_FILE), &rows)
        .and_then(|_| output::write_summary(&out.join(output::SUMMARY_FILE), &summary));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAILED;
    }
    if pass {
        0
    } else {
        EXIT_FAILED
    }
}

fn report(dir: &Path) -> u8 {
    let tallies = match output::read_tallies(&dir.join(output::CSV_FILE)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    println!("{:<24} {:>6} {:>6} {:>6} {:>6}", "experiment", "pass", "fail", "info", "error");
    let mut ok = true;
    for (name, t) in &tallies {
        println!("{name:<24} {:>6} {:>6} {:>6} {:>6}", t.pass, t.fail, t.info, t.error);
        for f in &t.failing {
            println!("    {f}");
        }
        ok &= t.fail == 0 && t.error == 0;
    }
    if ok {
        0
    } else {
        EXIT_FAILED
    }
}

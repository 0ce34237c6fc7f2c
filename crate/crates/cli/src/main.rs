//! `caloric`: batch runs of the capacity experiments.
//!
//! Exit status 0 on success, 1 on invalid input, 2 when a computation does
//! not converge. Set `CALORIC_THREADS` to cap the worker pool.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgAction, Command};
use serde_json::{json, Map, Value};

use config::{read_config_file, RunConfig, SUBCOMMANDS};
use output::OutputDir;

pub const THREADS_ENV: &str = "CALORIC_THREADS";

#[derive(Debug)]
pub struct RunError {
    pub code: u8,
    pub message: String,
}

impl RunError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<caloric::Error> for RunError {
    fn from(e: caloric::Error) -> Self {
        use caloric::Error as E;
        match e {
            E::QuadratureNonConvergence(_)
            | E::NoConvergence(_)
            | E::Infeasible
            | E::Unbounded
            | E::OutsideProfileRange { .. }
            | E::Internal(_) => Self::numerical(e.to_string()),
            _ => Self::invalid(e.to_string()),
        }
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("caloric")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Fractional caloric capacity experiments")
        .after_help(format!("Environment: {THREADS_ENV}=<n> sets the worker thread count."))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sc in SUBCOMMANDS {
        let mut sub = Command::new(sc.name)
            .about(sc.about)
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .default_value("caloric-out")
                    .help("output directory"),
            )
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key = value file; flags take precedence"),
            );
        for p in sc.params {
            sub = sub.arg(
                Arg::new(p.key)
                    .long(p.key)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help(format!("{} [default: {}]", p.help, p.default)),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| RunError::invalid(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::invalid(format!("cannot size the thread pool: {e}")))
}

fn execute(args: Vec<String>) -> Result<(), RunError> {
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return Err(RunError {
                code,
                message: String::new(),
            });
        }
    };
    configure_threads()?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let schema = config::subcommand(name).expect("registered subcommand");
    let file = match sub.get_one::<String>("config") {
        Some(path) => read_config_file(path.as_ref())?,
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = schema
        .params
        .iter()
        .filter_map(|p| sub.get_one::<String>(p.key).map(|v| (p.key.to_string(), v.clone())))
        .collect();
    let mut cfg = RunConfig::resolve(schema, &file, &flags)?;
    let out_dir = PathBuf::from(sub.get_one::<String>("out").expect("has default"));

    let mut dir = OutputDir::acquire(&out_dir)?;
    let start = Instant::now();
    let outcome = commands::run(&mut cfg)?;

    let mut artifacts: Vec<String> = outcome.files.iter().map(|(n, _)| n.clone()).collect();
    artifacts.push("manifest.txt".into());
    for (file, contents) in &outcome.files {
        dir.write(file, contents)?;
    }
    dir.write("manifest.txt", &cfg.manifest_text())?;
    let mut report = Map::new();
    report.insert("subcommand".into(), json!(name));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("manifest".into(), Value::Object(cfg.manifest()));
    report.insert("results".into(), Value::Object(outcome.results));
    report.insert("artifacts".into(), json!(artifacts));
    report.insert("runtime_ms".into(), json!(start.elapsed().as_millis() as u64));
    let mut text = serde_json::to_string_pretty(&Value::Object(report)).expect("serializable report");
    text.push('\n');
    dir.write("report.json", &text)?;
    dir.commit();
    println!("wrote {}", out_dir.join("report.json").display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("caloric: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use splatgeom::{execute, exit_code, Cli, QualityGate};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let as_json = cli.json;
    let result = execute(cli);
    let code = exit_code(&result);
    let shown = match &result {
        Ok(outcome) => Some(outcome),
        Err(e) => e.downcast_ref::<QualityGate>().map(|g| &g.outcome),
    };
    if let Some(outcome) = shown {
        if as_json {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.json).expect("json value")
            );
        } else {
            print!("{}", outcome.text);
        }
    }
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(code)
}

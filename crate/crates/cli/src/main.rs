mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{base_config, Cli, Command};
use error::CliError;

fn dispatch(command: Command) -> Result<serde_json::Value, CliError> {
    let (cfg, data, truth) = match &command {
        Command::Gen(a) => {
            let mut cfg = base_config(&a.common)?;
            a.data.apply(&mut cfg);
            if let Some(t) = a.trials {
                cfg.trials = t;
            }
            (cfg, None, None)
        }
        Command::Fit(a) => {
            let mut cfg = base_config(&a.common)?;
            a.gen.apply(&mut cfg);
            a.solver.apply(&mut cfg);
            if let Some(t) = a.trials {
                cfg.trials = t;
            }
            (cfg, a.data.clone(), a.truth.clone())
        }
        Command::Sweep(a) => {
            let mut cfg = base_config(&a.common)?;
            a.apply(&mut cfg)?;
            (cfg, None, None)
        }
        Command::Bandit(a) => {
            let mut cfg = base_config(&a.common)?;
            a.apply(&mut cfg);
            (cfg, None, None)
        }
        Command::EstimateConstant(a) => {
            let mut cfg = base_config(&a.common)?;
            a.apply(&mut cfg);
            (cfg, None, None)
        }
    };
    commands::pool(cfg.jobs)?.install(|| match command {
        Command::Gen(_) => commands::gen::run(&cfg),
        Command::Fit(_) => commands::fit::run(&cfg, data.as_deref(), truth.as_deref()),
        Command::Sweep(_) => commands::sweep::run(&cfg),
        Command::Bandit(_) => commands::bandit::run(&cfg),
        Command::EstimateConstant(_) => commands::constant::run(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim_end().to_string());
            eprintln!("{}", err.report());
            return ExitCode::from(err.exit_code());
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}

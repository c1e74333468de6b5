mod args;
mod commands;
mod error;
mod io;
mod model_file;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Search(a) => commands::cmd_search(a),
        Command::Impute(a) => commands::cmd_impute(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::Study(a) => commands::cmd_study(a),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
    }
}

fn fail(e: &CliError) -> ! {
    eprintln!("hyperclust: error[{}]: {e}", e.class());
    std::process::exit(e.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            fail(&CliError::Usage(line));
        }
    };
    match run(&cli) {
        Ok(out) => print!("{out}"),
        Err(e) => fail(&e),
    }
}

use clap::Parser;
use cscavity_cli::{run, Cli, THREADS_ENV};

fn main() {
    let cli = Cli::parse();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("thread pool is configured once");
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{value}`");
                std::process::exit(cscavity_cli::error::EXIT_VALIDATION);
            }
        }
    }
    if let Err(e) = run(&cli.command) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

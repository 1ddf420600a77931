use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::INFO)
        .init();
    let cli = actgen_service::cli::Cli::parse();
    let stdout = std::io::stdout();
    match actgen_service::cli::run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Ok(json) = serde_json::to_string(&e) {
                eprintln!("{json}");
            }
            ExitCode::FAILURE
        }
    }
}

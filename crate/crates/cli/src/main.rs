use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(landis_cli::run(std::env::args_os()))
}

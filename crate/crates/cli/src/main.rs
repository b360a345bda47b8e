use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(delayfb_cli::run(std::env::args_os().collect()))
}

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hawkes_cli::main_with(std::env::args_os()))
}

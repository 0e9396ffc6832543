use std::process::ExitCode;

fn main() -> ExitCode {
    lbd::cli::main_with_args(std::env::args_os())
}

use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    let code = panic::catch_unwind(|| lexfolio::cli::run(std::env::args_os())).unwrap_or(lexfolio::cli::EXIT_INTERNAL);
    ExitCode::from(code as u8)
}

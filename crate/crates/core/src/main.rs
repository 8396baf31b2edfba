use std::process::ExitCode;

fn main() -> ExitCode {
    match lobrate::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lobrate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

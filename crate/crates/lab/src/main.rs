use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hmf_lab::run(std::env::args_os()))
}

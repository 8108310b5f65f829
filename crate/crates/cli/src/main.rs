use std::process::ExitCode;

fn main() -> ExitCode {
    exactsem_cli::main_with(std::env::args())
}

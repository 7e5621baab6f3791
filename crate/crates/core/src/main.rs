fn main() -> std::process::ExitCode {
    ihm_core::cli::main_with_args(std::env::args_os())
}

fn main() {
    std::process::exit(ionpulse_cli::run(std::env::args_os()));
}

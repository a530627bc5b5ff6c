fn main() {
    std::process::exit(slipway_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(gstoch_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(hadamard_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(adahuber_cli::run(std::env::args_os()));
}

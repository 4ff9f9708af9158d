fn main() {
    std::process::exit(qpol_cli::run(std::env::args_os()));
}

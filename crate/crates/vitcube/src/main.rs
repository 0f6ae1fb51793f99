fn main() {
    std::process::exit(vitcube::cli::run_from(std::env::args_os().collect()));
}

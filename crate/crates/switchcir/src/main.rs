fn main() {
    std::process::exit(switchcir::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(qmech::cli::run(std::env::args_os()));
}

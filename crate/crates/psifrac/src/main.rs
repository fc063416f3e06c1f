fn main() {
    std::process::exit(psifrac::cli::run(std::env::args()));
}

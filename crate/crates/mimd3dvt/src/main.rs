fn main() {
    std::process::exit(mimd3dvt::cli::run(std::env::args_os()));
}

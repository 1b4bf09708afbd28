fn main() {
    std::process::exit(qcsim::cli::run())
}

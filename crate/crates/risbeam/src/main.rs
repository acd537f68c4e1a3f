fn main() {
    std::process::exit(risbeam::cli::run());
}

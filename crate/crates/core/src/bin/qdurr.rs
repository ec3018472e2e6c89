fn main() {
    std::process::exit(qdurr::cli::run());
}

fn main() {
    std::process::exit(ssadt::cli::run());
}

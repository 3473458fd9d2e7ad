fn main() {
    std::process::exit(goldenrule::cli::run());
}

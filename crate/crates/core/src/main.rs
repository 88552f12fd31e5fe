fn main() {
    std::process::exit(phonolearn::cli::run());
}

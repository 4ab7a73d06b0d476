fn main() {
    std::process::exit(phasefield::cli::main());
}

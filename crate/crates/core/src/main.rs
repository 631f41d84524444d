fn main() {
    std::process::exit(patina_core::cli::main());
}

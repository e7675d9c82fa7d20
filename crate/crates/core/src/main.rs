fn main() {
    std::process::exit(nehari::cli::main());
}

fn main() {
    std::process::exit(objql::cli::main());
}

fn main() {
    std::process::exit(debris_triage::cli::main());
}

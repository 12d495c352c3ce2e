fn main() {
    std::process::exit(jamlink::cli::main());
}

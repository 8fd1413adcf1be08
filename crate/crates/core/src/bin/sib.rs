fn main() {
    std::process::exit(sib::cli::main());
}

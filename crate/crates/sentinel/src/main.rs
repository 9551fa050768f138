fn main() {
    std::process::exit(ltv_sentinel::cli::main());
}

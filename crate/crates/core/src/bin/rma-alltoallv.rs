fn main() {
    std::process::exit(persistent_rma::cli::main());
}

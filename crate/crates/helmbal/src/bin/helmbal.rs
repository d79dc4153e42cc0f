fn main() {
    std::process::exit(helmbal::cli::main());
}

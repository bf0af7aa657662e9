fn main() {
    std::process::exit(dirprior::cli::main_with_args(std::env::args_os()));
}

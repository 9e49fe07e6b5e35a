fn main() {
    std::process::exit(tempered_bo::cli::main_with_args(std::env::args_os()));
}

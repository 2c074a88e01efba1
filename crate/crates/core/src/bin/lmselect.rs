fn main() {
    std::process::exit(lmselect::cli::main_with_args(std::env::args_os()));
}

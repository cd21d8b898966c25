fn main() {
    std::process::exit(logaug::cli::main_with_args(std::env::args_os()));
}

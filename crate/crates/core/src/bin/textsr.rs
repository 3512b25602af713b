fn main() {
    std::process::exit(textsr::cli::main_with_args(std::env::args_os()));
}

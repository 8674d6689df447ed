fn main() {
    std::process::exit(cyw_core::cli::main_with_args(std::env::args_os()));
}

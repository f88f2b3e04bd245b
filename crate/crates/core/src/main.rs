fn main() {
    std::process::exit(serrin_core::cli::main_with_args(std::env::args_os()));
}

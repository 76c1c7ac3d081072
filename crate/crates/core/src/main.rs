fn main() {
    std::process::exit(strongchain_core::cli::main_with_args(std::env::args_os()));
}

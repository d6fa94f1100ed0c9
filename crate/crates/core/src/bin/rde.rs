fn main() {
    std::process::exit(rde_core::cli::main_with_args(std::env::args_os()));
}

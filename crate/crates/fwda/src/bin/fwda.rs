fn main() {
    std::process::exit(fwda::cli::main_with_args(std::env::args_os()));
}

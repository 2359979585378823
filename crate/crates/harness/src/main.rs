fn main() {
    std::process::exit(psl_harness::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(qrepeater::harness::cli::main_with_args(std::env::args_os()));
}

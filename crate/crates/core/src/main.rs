fn main() {
    std::process::exit(bianchi_flow::cli::main_with_args(std::env::args_os()));
}

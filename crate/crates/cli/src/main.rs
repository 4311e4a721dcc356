fn main() {
    std::process::exit(lcic_cli::main_with_args(std::env::args_os()));
}

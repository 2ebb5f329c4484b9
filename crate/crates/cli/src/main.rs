fn main() {
    std::process::exit(eagle_cli::main_with_args(std::env::args_os()));
}

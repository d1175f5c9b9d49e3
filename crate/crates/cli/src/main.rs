fn main() {
    std::process::exit(talbot_cli::cli::main_with_args(std::env::args_os()));
}

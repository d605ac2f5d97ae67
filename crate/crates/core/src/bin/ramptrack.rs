fn main() {
    std::process::exit(ramptrack::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(pearcey_gap::cli::main_with_args(std::env::args_os()));
}

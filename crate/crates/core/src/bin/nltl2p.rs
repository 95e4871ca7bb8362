fn main() {
    std::process::exit(nltl2p::cli::main_with_args(std::env::args_os()));
}

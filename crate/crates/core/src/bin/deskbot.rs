fn main() {
    std::process::exit(deskbot::cli::main_with_args(std::env::args_os()));
}

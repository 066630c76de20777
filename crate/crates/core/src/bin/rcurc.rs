fn main() {
    std::process::exit(rcurc::cli::main_with_args(std::env::args_os()));
}

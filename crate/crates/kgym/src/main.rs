fn main() {
    std::process::exit(kgym::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(rootlevel::cli::main_with(std::env::args_os()));
}

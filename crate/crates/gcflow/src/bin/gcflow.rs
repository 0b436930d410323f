fn main() {
    std::process::exit(gcflow::cli::main_with(std::env::args_os()));
}

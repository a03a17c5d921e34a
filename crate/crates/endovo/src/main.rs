fn main() {
    std::process::exit(endovo::cli::run(std::env::args_os()));
}

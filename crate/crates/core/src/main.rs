fn main() {
    std::process::exit(hetsparse::cli::run(std::env::args_os()));
}

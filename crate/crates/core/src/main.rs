fn main() {
    std::process::exit(apimap::cli::run(std::env::args_os()));
}

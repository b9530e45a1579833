fn main() {
    std::process::exit(resprate::cli::run(std::env::args_os()));
}

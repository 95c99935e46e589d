fn main() {
    std::process::exit(gtraj::cli::run(std::env::args_os()));
}

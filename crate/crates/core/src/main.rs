fn main() {
    std::process::exit(lazyprop::cli::run(std::env::args_os()));
}

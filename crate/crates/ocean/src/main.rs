fn main() {
    std::process::exit(ocean::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(adaptel::cli::run(std::env::args_os()));
}

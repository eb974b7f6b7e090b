fn main() {
    std::process::exit(cogede::cli::run(std::env::args_os()));
}

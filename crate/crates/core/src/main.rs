fn main() {
    std::process::exit(herald::io::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(levy_merton::cli::run(std::env::args_os()));
}

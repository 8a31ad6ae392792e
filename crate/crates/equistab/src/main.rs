fn main() {
    std::process::exit(equistab::cli::run(std::env::args_os()));
}

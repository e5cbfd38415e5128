fn main() {
    std::process::exit(waning::cli::run(std::env::args_os()));
}

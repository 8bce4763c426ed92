fn main() {
    std::process::exit(pricedisp::cli::run(std::env::args_os()));
}

fn main() {
    let code = rumorlens::cli::run(std::env::args().skip(1));
    std::process::exit(code);
}

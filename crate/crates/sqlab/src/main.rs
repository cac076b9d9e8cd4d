fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(sqlab::cli::run(&argv));
}

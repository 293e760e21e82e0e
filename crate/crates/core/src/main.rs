fn main() {
    let code = rtlab::cli::run(std::env::args_os());
    std::process::exit(code);
}

fn main() {
    std::process::exit(uma_cli::run(std::env::args_os()));
}

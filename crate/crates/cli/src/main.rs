fn main() {
    std::process::exit(quadopo_cli::run(std::env::args_os()));
}

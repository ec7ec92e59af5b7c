fn main() {
    std::process::exit(ricci_cli::run(std::env::args_os()));
}

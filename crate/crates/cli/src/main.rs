fn main() {
    std::process::exit(keysample_cli::run(std::env::args_os()));
}

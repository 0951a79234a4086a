fn main() {
    std::process::exit(mce_cli::run(std::env::args_os()));
}

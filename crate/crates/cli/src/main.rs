fn main() {
    std::process::exit(aptb_cli::run(std::env::args_os()));
}

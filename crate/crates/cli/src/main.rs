fn main() {
    std::process::exit(berezin_cli::run(std::env::args_os()));
}

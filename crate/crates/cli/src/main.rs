fn main() {
    std::process::exit(bevcal_cli::run(std::env::args_os()));
}

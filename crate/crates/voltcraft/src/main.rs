fn main() {
    std::process::exit(voltcraft::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(sdgimpute::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(dnp::cli::run(std::env::args_os()));
}

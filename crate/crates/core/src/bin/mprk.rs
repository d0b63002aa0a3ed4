fn main() {
    std::process::exit(mprk::cli::run(std::env::args_os()));
}

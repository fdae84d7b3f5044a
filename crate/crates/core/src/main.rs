fn main() {
    std::process::exit(metameval::cli::run(std::env::args_os()));
}

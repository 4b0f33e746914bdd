fn main() {
    std::process::exit(threshreg::cli::run(std::env::args_os()));
}

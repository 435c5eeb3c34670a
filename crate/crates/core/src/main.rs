fn main() {
    std::process::exit(psdnorm::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(kappa_detect::cli::run(std::env::args_os()));
}

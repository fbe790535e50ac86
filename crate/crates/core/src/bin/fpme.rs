fn main() {
    std::process::exit(fpme::cli::run(std::env::args_os()));
}

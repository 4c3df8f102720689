fn main() {
    std::process::exit(deeplift::cli::run(std::env::args_os()));
}

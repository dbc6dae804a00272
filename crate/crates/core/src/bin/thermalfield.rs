fn main() {
    std::process::exit(thermalfield::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(bgk_core::cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(depthbins::cli::run(std::env::args_os()));
}

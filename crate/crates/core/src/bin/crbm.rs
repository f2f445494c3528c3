fn main() {
    std::process::exit(crbm_core::cli::run(std::env::args_os()));
}

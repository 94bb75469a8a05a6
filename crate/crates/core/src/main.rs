fn main() {
    std::process::exit(tdks_core::cli::run_from_args(std::env::args_os()));
}

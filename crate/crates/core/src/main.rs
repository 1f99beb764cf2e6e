fn main() {
    std::process::exit(stn_core::cli::run(std::env::args_os()));
}

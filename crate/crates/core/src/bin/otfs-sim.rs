fn main() {
    std::process::exit(otfs_core::cli::run(std::env::args_os()));
}

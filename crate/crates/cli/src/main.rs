fn main() {
    std::process::exit(kdx_cli::run(std::env::args_os()));
}

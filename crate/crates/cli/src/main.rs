fn main() {
    std::process::exit(dmlp_cli::run(std::env::args_os()));
}

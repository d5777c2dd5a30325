fn main() {
    std::process::exit(hqrl_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(sfde_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(levy_ou::cli::cli_main(std::env::args_os()));
}

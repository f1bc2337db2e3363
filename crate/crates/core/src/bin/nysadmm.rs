fn main() {
    std::process::exit(nysadmm::cli::cli_main(std::env::args_os()));
}

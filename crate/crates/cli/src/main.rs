fn main() {
    std::process::exit(krigrel_cli::run(std::env::args_os()));
}

fn main() {
    std::process::exit(slumkit_cli::run(std::env::args_os()));
}

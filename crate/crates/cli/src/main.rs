fn main() {
    std::process::exit(surfmap_cli::main_with_args(std::env::args_os()));
}

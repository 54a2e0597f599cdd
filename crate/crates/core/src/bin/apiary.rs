fn main() {
    std::process::exit(apiary::app::cli::main_with_args(std::env::args_os()));
}

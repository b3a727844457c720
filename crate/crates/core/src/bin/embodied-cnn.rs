fn main() {
    std::process::exit(embodied_cnn::cli::main_with_args(std::env::args_os()));
}

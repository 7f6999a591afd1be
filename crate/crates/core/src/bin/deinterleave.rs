fn main() {
    std::process::exit(deinterleave::cli::main_with_args(std::env::args_os()));
}

fn main() {
    std::process::exit(schelling_core::cli::main(std::env::args_os()));
}

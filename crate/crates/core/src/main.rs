fn main() {
    std::process::exit(heralded_fock::cli::main_with_args(std::env::args_os()));
}

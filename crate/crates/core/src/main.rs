fn main() {
    std::process::exit(pbox_sobol::cli::run(std::env::args_os()));
}

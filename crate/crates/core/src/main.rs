fn main() {
    std::process::exit(tautweight::cli::run(std::env::args_os()));
}

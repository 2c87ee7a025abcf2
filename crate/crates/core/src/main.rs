fn main() {
    std::process::exit(heterotest::cli::dispatch(std::env::args_os()));
}

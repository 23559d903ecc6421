fn main() {
    std::process::exit(ptlab::cli::dispatch(std::env::args_os()));
}

fn main() {
    std::process::exit(foodbench::cli::run_from(std::env::args_os()));
}

fn main() {
    std::process::exit(modalfeat::cli::run(std::env::args_os()));
}

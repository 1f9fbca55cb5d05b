fn main() {
    std::process::exit(sshfd::cli::run(std::env::args_os()));
}

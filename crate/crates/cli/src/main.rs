fn main() {
    std::process::exit(clusterkr_cli::run(std::env::args_os()));
}

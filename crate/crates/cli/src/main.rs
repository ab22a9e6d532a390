fn main() {
    std::process::exit(lineup_cli::run_cli(std::env::args_os()));
}

fn main() {
    std::process::exit(nightpulse_service::cli::main());
}

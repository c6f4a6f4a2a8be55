fn main() -> std::process::ExitCode {
    marginalia_portal::cli::run()
}

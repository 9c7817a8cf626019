fn main() -> std::process::ExitCode {
    ecpsim::cli::main()
}

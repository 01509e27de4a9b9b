fn main() -> std::process::ExitCode {
    modattach::cli::main()
}

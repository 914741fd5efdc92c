fn main() -> std::process::ExitCode {
    dualpath::cli::main()
}

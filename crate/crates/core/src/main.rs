fn main() -> std::process::ExitCode {
    posbias::cli::main()
}

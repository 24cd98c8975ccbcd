fn main() -> std::process::ExitCode {
    oddball::cli::main()
}

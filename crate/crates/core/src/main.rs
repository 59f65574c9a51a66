fn main() -> std::process::ExitCode {
    frechet_geo::cli::main_entry()
}

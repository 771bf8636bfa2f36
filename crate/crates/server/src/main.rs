fn main() {
    std::process::exit(prefelicit_server::cli::main_exit_code());
}

fn main() {
    let code = anderson_lab_cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}

fn main() {
    demorgan_lab::cli::configure_threads();
    let code = demorgan_lab::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}

fn main() {
    let code = levinson_lab::run_subcommand(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}

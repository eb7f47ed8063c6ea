use clap::Parser;

fn main() {
    let cli = svilab::Cli::parse();
    let code = svilab::execute(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}

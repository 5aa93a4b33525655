use clap::Parser;

fn main() {
    let cli = odeflow::cli::Cli::parse();
    if let Err(e) = odeflow::cli::run(cli) {
        eprintln!("odeflow: {e}");
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            eprintln!("  caused by: {s}");
            source = s.source();
        }
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;

fn main() {
    let cli = casebrief_service::cli::Cli::parse();
    if let Err(e) = casebrief_service::cli::run(cli) {
        let line = format!("{e:#}").replace(['\n', '\r'], " ");
        eprintln!("error: {line}");
        std::process::exit(1);
    }
}

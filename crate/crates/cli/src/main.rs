use clap::Parser;

fn main() {
    let cli = bqo_cli::Cli::parse();
    if let Err(err) = bqo_cli::run(cli) {
        let diagnostic = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{diagnostic}");
        std::process::exit(1);
    }
}

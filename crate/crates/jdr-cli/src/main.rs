use clap::Parser;

use jdr_cli::commands::{run, Cli};

// Exit codes: 0 success, 2 validation error, 3 numerical failure.
fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        let kind = if error.is_validation() {
            "validation"
        } else {
            "numerical"
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": error.to_string(), "kind": kind })
        );
        std::process::exit(if error.is_validation() { 2 } else { 3 });
    }
}

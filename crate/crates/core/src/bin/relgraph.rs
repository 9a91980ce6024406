use std::path::PathBuf;
use std::process::ExitCode;

use relgraph::cli;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: relgraph <job.json>");
        return ExitCode::from(2);
    };
    match cli::run_file(&PathBuf::from(&path)) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for (p, _) in &outcome.artifacts {
                println!("wrote {}", p.display());
            }
            if outcome.artifacts.is_empty() {
                println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes"));
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

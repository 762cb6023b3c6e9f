use clap::Parser;
use ehor::{run_cli, Args};

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // help/version print and exit 0; real flag errors exit 2
            e.exit();
        }
    };
    if let Err(e) = run_cli(&args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

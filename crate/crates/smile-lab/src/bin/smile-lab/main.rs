//! smile-lab: smile dynamics analytics, estimators and the Monte Carlo lab
//! behind one reproducible command line.

mod args;
mod cmds;
mod meta;

use clap::Parser;

fn main() {
    // optional cap on worker threads; parallel results do not depend on it
    if let Ok(v) = std::env::var("SMILE_LAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = args::Cli::parse();
    match cmds::run(cli) {
        Ok(()) => {}
        Err(err) => {
            let payload = serde_json::json!({
                "code": err.code(),
                "message": err.to_string(),
                "context": {
                    "tool": "smile-lab",
                    "version": env!("CARGO_PKG_VERSION"),
                },
            });
            eprintln!("{payload}");
            std::process::exit(1);
        }
    }
}

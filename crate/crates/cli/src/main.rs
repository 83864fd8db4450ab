use std::process::ExitCode;

use clap::Parser;
use slitwave::{run, thread_limit, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_limit().and_then(|limit| {
        if let Some(n) = limit {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        run(cli)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

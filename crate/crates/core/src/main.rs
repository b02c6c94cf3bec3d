use std::process::ExitCode;

use clap::Parser;

use quadtarget::cli::{run, Cli, EXIT_ERROR, EXIT_OK};

fn main() -> ExitCode {
    // Parse manually so usage errors land on exit code 1; codes 0/1/2 are
    // the documented scripting interface (2 = run flagged a crash).
    match Cli::try_parse() {
        Ok(cli) => ExitCode::from(run(cli)),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            ExitCode::from(code)
        }
    }
}

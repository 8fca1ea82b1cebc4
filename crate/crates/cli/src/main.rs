use std::process::ExitCode;

use bfmi_cli::{parse_spec, run_to_destination, CliError};

fn main() -> ExitCode {
    let result = parse_spec(std::env::args_os()).and_then(|spec| run_to_destination(&spec, &mut std::io::stderr()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Clap(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("bfmi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

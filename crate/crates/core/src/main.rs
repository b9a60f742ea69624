use clap::error::ErrorKind;
use clap::Parser;

use roadroute::cli::{error_kind, exit_code, run, Cli, EXIT_OK, EXIT_VALIDATION};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = run(cli, &mut stdout) {
        eprintln!("error={}", error_kind(&e));
        eprintln!("message={e}");
        std::process::exit(exit_code(&e));
    }
}

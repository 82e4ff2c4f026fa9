use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = hrpareto::cli::run(std::env::args_os(), &mut std::io::stdin().lock());
    print!("{}", outcome.stdout);
    let _ = std::io::stdout().flush();
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code as u8)
}

use std::process::ExitCode;

use bloch_cli::{run, threads_from_env};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match threads_from_env() {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("error: cannot start thread pool: {e}");
                return ExitCode::from(4);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = run(std::env::args_os(), &mut out, &mut err);
    ExitCode::from(code as u8)
}

use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let config = match rosenbench_cli::parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let status =
        rosenbench_cli::execute(&config, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(status as u8)
}

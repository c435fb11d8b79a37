use std::process::ExitCode;

fn main() -> ExitCode {
    // Die quietly when stdout is closed early (e.g. piped into head).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    ExitCode::from(fibsim::cli::main())
}

use clap::Parser;
use colse::cli::{run, Cli};

fn main() -> std::process::ExitCode {
    // Die quietly when a downstream pipe closes (`colse estimate ... | head`)
    // instead of panicking mid-print; Rust ignores SIGPIPE by default.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    run(Cli::parse())
}

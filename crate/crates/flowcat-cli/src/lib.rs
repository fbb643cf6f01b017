//! Command line front end for the flowcat library.

/// Runs the CLI on the given argv (including the program name) and
/// returns the process exit code: 0 for success, 1 when a validation or
/// comparison fails, 2 for usage or input errors.
pub fn run(args: &[String]) -> u8 {
    let _ = args;
    eprintln!("flowcat: no subcommands wired yet");
    2
}

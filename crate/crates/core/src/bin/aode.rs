use std::io::Write;
use std::panic;

use autoencode::cli::{run, EXIT_CONFIG};

fn main() {
    let code = panic::catch_unwind(|| {
        let mut out = std::io::stdout();
        let code = run(std::env::args_os(), &mut out);
        let _ = out.flush();
        code
    })
    .unwrap_or(EXIT_CONFIG);
    std::process::exit(code);
}

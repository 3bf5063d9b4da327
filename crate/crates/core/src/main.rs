// SPDX-License-Identifier: MIT OR Apache-2.0

fn main() {
    let code = statetrace::cli::run_cli(std::env::args_os());
    std::process::exit(code);
}

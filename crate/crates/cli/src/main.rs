//! ```text
//! atlas codes    --config run.toml --out codes/
//! atlas generate --config run.toml --scenario scene.toml --out rec.iq
//! atlas detect   --config run.toml --recording rec.iq
//! atlas simulate --config run.toml --scenario scene.toml --events ev.jsonl --summary sum.json
//! atlas bench    --config run.toml --patterns 1,16,128 --out bench.csv
//! ```

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match atlas_cli::run(atlas_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

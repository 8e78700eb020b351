mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::{Context, Failure};
use manifest::{Inputs, RunManifest};

fn write_manifest(cli: &Cli, ctx: &Context) -> Result<(), Failure> {
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        params: serde_json::to_value(&cli.command).map_err(|e| Failure::input(e.to_string()))?,
        seed: cli.seed,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        input_hashes: ctx.inputs.hashes.clone(),
        outputs: ctx.outputs.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::input(e.to_string()))?;
    std::fs::write(ctx.out_dir.join("manifest.json"), text)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut ctx = Context {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
        inputs: Inputs::default(),
        outputs: Vec::new(),
    };
    let outcome = commands::run(&cli.command, &mut ctx);
    // The manifest is written for failed runs too; it lists what did get written.
    write_manifest(cli, &ctx)?;
    outcome
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("spherectl {}: {}", cli.command.name(), f.message);
            ExitCode::from(f.code as u8)
        }
    }
}

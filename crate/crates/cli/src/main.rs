mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use shuffle_lab::rng::RNG_ALGORITHM;
use shuffle_lab::Error;

use args::{Cli, Command, OutputArgs};
use output::Output;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_LEMMA: u8 = 3;
const EXIT_CAP: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::LemmaInapplicable { .. } => EXIT_LEMMA,
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::NotConverged { .. } | Error::NotAttained { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(text) = std::env::var("SHUFFLE_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("SHUFFLE_LAB_THREADS must be a positive integer, got {text:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("cannot configure thread pool: {e}"))
}

fn run_command<A: Serialize>(
    name: &str,
    args: &A,
    output: &OutputArgs,
    run: impl FnOnce(&A) -> shuffle_lab::Result<Output>,
) -> Result<(), (u8, String)> {
    let result = run(args).map_err(|e| (exit_code(&e), e.to_string()))?;
    let mut config = serde_json::to_value(args).expect("serializable config");
    if let serde_json::Value::Object(map) = &mut config {
        map.insert("command".into(), name.into());
    }
    let format = output.format.unwrap_or_else(|| result.default_format());
    let text = output::render(&result, format, &config, RNG_ALGORITHM);
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let result = match &cli.command {
        Command::Bounds(a) => run_command("bounds", a, &a.model.output, commands::bounds),
        Command::ExactTv(a) => run_command("exact-tv", a, &a.model.output, commands::exact_tv),
        Command::McTv(a) => run_command("mc-tv", a, &a.model.output, commands::mc_tv),
        Command::EigenCheck(a) => run_command("eigen-check", a, &a.output, commands::eigen_check),
        Command::Defect(a) => run_command("defect", a, &a.output, commands::defect),
        Command::RudvalisVerify(a) => run_command("rudvalis-verify", a, &a.output, commands::rudvalis_verify),
        Command::MixScaling(a) => run_command("mix-scaling", a, &a.output, commands::mix_scaling),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

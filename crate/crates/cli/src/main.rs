use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lunc_sim::ante::TaxParams;
use lunc_sim::bundled;
use lunc_sim::config::GenesisConfig;
use lunc_sim::fees::estimate_fee;
use lunc_sim::fraction::Fraction;
use lunc_sim::report::write_reports;
use lunc_sim::scenario::Scenario;
use lunc_sim::simulator::{run_scenario, SimOptions};
use lunc_sim::Error;

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_HALTED: u8 = 4;
const EXIT_INVARIANT: u8 = 5;

#[derive(Parser)]
#[command(name = "lunc-sim", version, about = "Deterministic proof-of-stake chain simulator")]
struct Cli {
    /// Accepted for reproducible invocations; the simulator draws no randomness.
    #[arg(long, global = true, env = "LUNC_SIM_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario against a genesis file and write reports.
    Run {
        #[arg(long)]
        genesis: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Stop at the first halt instead of retrying the height.
        #[arg(long)]
        strict_halt: bool,
    },
    /// Run a bundled scenario.
    Replay {
        #[arg(long, value_parser = bundled_name)]
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        strict_halt: bool,
    },
    /// List bundled scenarios.
    List,
    /// Fee to declare for a transfer: min(rate * amount, cap) + gas.
    EstimateFee {
        #[arg(long)]
        amount: u128,
        #[arg(long, default_value = "uluna")]
        denom: String,
        /// Gas fee in micro-units of the fee denom.
        #[arg(long, default_value_t = 0)]
        gas: u128,
        #[arg(long, default_value = "0")]
        rate: Fraction,
        #[arg(long)]
        cap: Option<u128>,
    },
}

fn bundled_name(s: &str) -> Result<String, String> {
    if bundled::names().any(|n| n == s) {
        Ok(s.to_string())
    } else {
        let known: Vec<_> = bundled::names().collect();
        Err(format!("expected one of: {}", known.join(", ")))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::InvariantViolation { .. } => EXIT_INVARIANT,
        _ => EXIT_PARSE,
    }
}

fn simulate(genesis: GenesisConfig, scenario: Scenario, out: &Path, strict_halt: bool) -> Result<u8, Error> {
    let state = genesis.build()?;
    let (state, report) = run_scenario(state, scenario, SimOptions { strict_halt })?;
    write_reports(&report, &state, out)?;
    println!(
        "{}: final height {} hash {}{}",
        if report.scenario.is_empty() { "scenario" } else { &report.scenario },
        report.final_height,
        report.final_hash,
        if report.halted_at_end { " (halted)" } else { "" }
    );
    Ok(if report.halted_at_end { EXIT_HALTED } else { 0 })
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} ignored: runs are deterministic");
    }
    match cli.command {
        Command::Run { genesis, scenario, out, strict_halt } => {
            let g = GenesisConfig::from_path(&genesis)?;
            let s = Scenario::from_path(&scenario)?;
            simulate(g, s, &out, strict_halt)
        }
        Command::Replay { name, out, strict_halt } => {
            let (g, s) = bundled::load(&name)?;
            simulate(g, s, &out, strict_halt)
        }
        Command::List => {
            for n in bundled::names() {
                println!("{n}");
            }
            Ok(0)
        }
        Command::EstimateFee { amount, denom, gas, rate, cap } => {
            let mut params = TaxParams::with_rate(rate);
            if let Some(c) = cap {
                params.default_cap = c;
            }
            params.validate()?;
            let est = estimate_fee(amount, &denom, gas, &params);
            println!("{}", serde_json::to_string_pretty(&est).expect("estimate serializes"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spoc_sim::actors::{NodeStrategy, RequestorStrategy};
use spoc_sim::harness::{
    dominance_check, gas_report, latency_report, payoff_matrix, run_scenario, ParamGrid,
    PayoffParams, ScenarioConfig, ScenarioOutcome, Trace,
};
use spoc_sim::Tier;

#[derive(Debug, Parser)]
#[command(name = "spoc", version, about = "Hash-locked escrow payment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and print its outcome.
    Scenario {
        #[arg(long)]
        requestor: Option<RequestorStrategy>,
        #[arg(long)]
        node: Option<NodeStrategy>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON-lines trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Print the payoff matrix for each grid point and check honest dominance.
    Payoffs {
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-function gas and cost at a tier.
    Gas {
        #[arg(long)]
        tier: Tier,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Time an honest run at a tier.
    Latency {
        #[arg(long)]
        tier: Tier,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Rebuild the outcome and final contract state from a trace file.
    Inspect {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
}

/// Exit status: 1 for failed checks, 2 for bad input.
enum Failure {
    Check(String),
    Input(String),
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_toml(&text).map_err(input)?;
    if let Some(manifest) = &cfg.functions {
        if manifest.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.functions = Some(dir.join(manifest));
            }
        }
    }
    Ok(cfg)
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn outcome_table(out: &mut impl Write, o: &ScenarioOutcome) -> io::Result<()> {
    writeln!(
        out,
        "requestor strategy   {}",
        o.requestor_strategy.as_str()
    )?;
    writeln!(out, "node strategy        {}", o.node_strategy.as_str())?;
    writeln!(out, "requestor payoff     {}", o.requestor_payoff)?;
    writeln!(
        out,
        "node payoff          {} ({})",
        o.node_payoff, o.claimant
    )?;
    writeln!(out, "requestor with gas   {}", o.requestor_payoff_with_gas)?;
    writeln!(out, "node with gas        {}", o.node_payoff_with_gas)?;
    writeln!(out, "locked in contract   {}", o.locked_in_contract)?;
    for (party, gas) in &o.gas_by_party {
        writeln!(out, "gas {:<17}{}", party, gas)?;
    }
    writeln!(out, "result received      {}", o.result_received)?;
    writeln!(out, "executed             {}", o.executed)?;
    writeln!(out, "elapsed              {} s", o.elapsed)?;
    writeln!(out, "trace                {}", o.trace_id)
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Input(e.to_string());
    match cli.command {
        Command::Scenario {
            requestor,
            node,
            config,
            format,
            seed,
            trace_out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(r) = requestor {
                cfg.requestor = r;
            }
            if let Some(n) = node {
                cfg.node = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = run_scenario(&cfg).map_err(input)?;
            if let Some(path) = trace_out {
                let file = fs::File::create(&path)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                run.trace
                    .write_jsonl(io::BufWriter::new(file))
                    .map_err(io_err)?;
            }
            match format {
                Format::Json => print_json(out, &run.outcome),
                Format::Table => outcome_table(out, &run.outcome),
            }
            .map_err(io_err)?;
            if !run.invariants.all_hold() {
                return Err(Failure::Check(run.invariants.problems.join("; ")));
            }
        }
        Command::Payoffs { grid, format, seed } => {
            let grid = match grid {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                    ParamGrid::from_toml(&text).map_err(input)?
                }
                None => ParamGrid {
                    points: vec![PayoffParams::default()],
                    random: None,
                },
            };
            let points = grid.expand();
            let mut mismatched = 0;
            let mut matrices = Vec::new();
            for p in &points {
                let m = payoff_matrix(p, seed).map_err(input)?;
                if m.rational && !m.closed_form_mismatches().is_empty() {
                    mismatched += 1;
                }
                matrices.push(m);
            }
            let report = dominance_check(&grid, seed).map_err(input)?;
            match format {
                Format::Json => print_json(
                    out,
                    &serde_json::json!({ "matrices": matrices, "dominance": report }),
                ),
                Format::Table => (|| {
                    for m in &matrices {
                        writeln!(out, "{m}")?;
                    }
                    writeln!(out, "{report}")
                })(),
            }
            .map_err(io_err)?;
            if mismatched > 0 || !report.holds() {
                return Err(Failure::Check("payoff checks failed".into()));
            }
        }
        Command::Gas {
            tier,
            config,
            format,
        } => {
            let cfg = load_config(config.as_deref())?;
            let report = gas_report(&cfg.ledger.gas, tier).map_err(input)?;
            match format {
                Format::Json => print_json(out, &report),
                Format::Table => write!(out, "{report}"),
            }
            .map_err(io_err)?;
        }
        Command::Latency {
            tier,
            config,
            format,
        } => {
            let cfg = load_config(config.as_deref())?;
            let report = latency_report(&cfg, tier).map_err(input)?;
            match format {
                Format::Json => print_json(out, &report),
                Format::Table => writeln!(out, "{report}"),
            }
            .map_err(io_err)?;
            if !report.matches() {
                return Err(Failure::Check(
                    "measured latency differs from the model".into(),
                ));
            }
        }
        Command::Inspect { trace, format } => {
            let file = fs::File::open(&trace)
                .map_err(|e| Failure::Input(format!("{}: {e}", trace.display())))?;
            let t = Trace::read_jsonl(BufReader::new(file)).map_err(input)?;
            let outcome = t.reconstruct_outcome().map_err(input)?;
            let failures = t.conservation_failures();
            match format {
                Format::Json => print_json(
                    out,
                    &serde_json::json!({
                        "outcome": outcome,
                        "contract": t.contract_state(),
                        "conservationFailures": failures,
                    }),
                ),
                Format::Table => (|| {
                    outcome_table(out, &outcome)?;
                    writeln!(out, "entries              {}", t.entries.len())?;
                    writeln!(out, "contract state")?;
                    if let Some(c) = t.contract_state() {
                        writeln!(
                            out,
                            "{}",
                            serde_json::to_string_pretty(c).unwrap_or_default()
                        )?;
                    }
                    Ok(())
                })(),
            }
            .map_err(io_err)?;
            if !failures.is_empty() {
                return Err(Failure::Check(format!(
                    "conservation fails at steps {failures:?}"
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

//! Several nodes race for one task; only the first claim lands.

use spoc_sim::contract::CallOutcome;
use spoc_sim::harness::{run_scenario, ScenarioConfig, TraceRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..4 {
        let cfg = ScenarioConfig {
            nodes: 5,
            seed,
            ..ScenarioConfig::default()
        };
        let run = run_scenario(&cfg)?;
        let claims: Vec<String> = run
            .trace
            .entries
            .iter()
            .filter_map(|e| match &e.record {
                TraceRecord::Call {
                    actor,
                    function,
                    outcome,
                    ..
                } if function == "claimTask" => Some(match outcome {
                    CallOutcome::Accepted => format!("{actor}*"),
                    _ => actor.clone(),
                }),
                _ => None,
            })
            .collect();
        println!(
            "seed {seed}: arrivals {}  winner {}  winner payoff {} wei",
            claims.join(" "),
            run.outcome.claimant,
            run.outcome.node_payoff
        );
    }
    Ok(())
}

//! Gas and cost per tier, and the measured end-to-end latency of an honest run.

use spoc_sim::harness::{gas_report, latency_report, ScenarioConfig};
use spoc_sim::Tier;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
        execution_delay: 30,
        ..ScenarioConfig::default()
    };
    for tier in Tier::ALL {
        println!("{}", gas_report(&cfg.ledger.gas, tier)?);
        let latency = latency_report(&cfg, tier)?;
        println!("{latency}\n");
    }
    Ok(())
}

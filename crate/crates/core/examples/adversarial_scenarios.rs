//! Each deviation against an honest counterparty, next to the honest baseline.

use spoc_sim::actors::{NodeStrategy, RequestorStrategy};
use spoc_sim::harness::{run_scenario, ScenarioConfig};
use spoc_sim::Money;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = [
        (RequestorStrategy::Honest, NodeStrategy::Honest),
        (RequestorStrategy::Honest, NodeStrategy::ClaimOnly),
        (RequestorStrategy::Honest, NodeStrategy::ComputeNoDeliver),
        (RequestorStrategy::NoConfirm, NodeStrategy::Honest),
        (RequestorStrategy::WithholdInput, NodeStrategy::Honest),
    ];
    println!(
        "{:<15} {:<19} {:>10} {:>10} {:>10}",
        "requestor", "node", "R (ether)", "EN (ether)", "locked"
    );
    for (requestor, node) in pairs {
        let mut cfg = ScenarioConfig {
            requestor,
            node,
            ..ScenarioConfig::default()
        };
        cfg.ledger.threshold = Money::ether(5);
        let o = run_scenario(&cfg)?.outcome;
        let ether = |w: i128| w as f64 / 1e18;
        println!(
            "{:<15} {:<19} {:>10} {:>10} {:>10}",
            requestor.as_str(),
            node.as_str(),
            ether(o.requestor_payoff),
            ether(o.node_payoff),
            o.locked_in_contract.as_ether_f64()
        );
    }
    Ok(())
}

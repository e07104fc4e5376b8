//! Gas and latency reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{run_scenario, HarnessError, ScenarioConfig};
use crate::ledger::{GasSchedule, LedgerError, Tier};
use crate::money::Money;

/// The four calls of one honest task, in protocol order.
pub const TASK_FUNCTIONS: [&str; 4] = [
    "submitTask",
    "claimTask",
    "finalizeExecutionNode",
    "finalizeRequestor",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GasLine {
    pub function: String,
    pub gas: u64,
    pub cost: Money,
    pub ether: f64,
    pub usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GasReport {
    pub tier: Tier,
    pub gas_price: Money,
    pub usd_per_ether: f64,
    pub deploy: GasLine,
    pub per_function: Vec<GasLine>,
    pub total_per_task_gas: u64,
    pub total_per_task: GasLine,
}

pub fn gas_report(schedule: &GasSchedule, tier: Tier) -> Result<GasReport, LedgerError> {
    let line = |function: &str, gas: u64| -> Result<GasLine, LedgerError> {
        let cost = schedule.cost(gas, tier)?;
        let ether = cost.as_ether_f64();
        Ok(GasLine {
            function: function.to_string(),
            gas,
            cost,
            ether,
            usd: ether * schedule.usd_per_ether,
        })
    };
    let per_function = TASK_FUNCTIONS
        .iter()
        .map(|f| line(f, schedule.gas_for(f)?))
        .collect::<Result<Vec<_>, _>>()?;
    let total: u64 = per_function.iter().map(|l| l.gas).sum();
    Ok(GasReport {
        tier,
        gas_price: schedule.price(tier)?,
        usd_per_ether: schedule.usd_per_ether,
        deploy: line("deploy", schedule.gas_for("deploy")?)?,
        total_per_task: line("Total per task", total)?,
        per_function,
        total_per_task_gas: total,
    })
}

impl fmt::Display for GasReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "tier {} (gas price {} wei, {} USD/ether)",
            self.tier, self.gas_price.0, self.usd_per_ether
        )?;
        writeln!(
            f,
            "{:<24} {:>10} {:>14} {:>10}",
            "function", "gas", "ether", "usd"
        )?;
        let row = |f: &mut fmt::Formatter<'_>, l: &GasLine| {
            writeln!(
                f,
                "{:<24} {:>10} {:>14.8} {:>10.4}",
                l.function, l.gas, l.ether, l.usd
            )
        };
        row(f, &self.deploy)?;
        for l in &self.per_function {
            row(f, l)?;
        }
        row(f, &self.total_per_task)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyReport {
    pub tier: Tier,
    pub confirmation_delay: u64,
    pub execution_delay: u64,
    /// Ledger seconds an honest run actually took.
    pub measured: u64,
    /// Four sequential confirmations plus the execution delay.
    pub expected: u64,
}

impl LatencyReport {
    pub fn matches(&self) -> bool {
        self.measured == self.expected
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tier                {}", self.tier)?;
        writeln!(f, "confirmation delay  {} s", self.confirmation_delay)?;
        writeln!(f, "execution delay     {} s", self.execution_delay)?;
        writeln!(f, "expected            {} s", self.expected)?;
        write!(f, "measured            {} s", self.measured)
    }
}

/// Runs an honest pair at `tier` on top of `base` and times it.
pub fn latency_report(base: &ScenarioConfig, tier: Tier) -> Result<LatencyReport, HarnessError> {
    let cfg = ScenarioConfig {
        requestor: crate::actors::RequestorStrategy::Honest,
        node: crate::actors::NodeStrategy::Honest,
        tier,
        ..base.clone()
    };
    let delay = cfg
        .ledger
        .gas
        .delay(tier)
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let run = run_scenario(&cfg)?;
    Ok(LatencyReport {
        tier,
        confirmation_delay: delay,
        execution_delay: cfg.execution_delay,
        measured: run.outcome.elapsed,
        expected: 4 * delay + cfg.execution_delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals() {
        let r = gas_report(&GasSchedule::default(), Tier::Slow).unwrap();
        assert_eq!(r.total_per_task_gas, 277_880 + 145_120 + 52_802 + 106_357);
        assert_eq!(r.deploy.gas, 1_260_850);
        assert!((r.total_per_task.ether - 0.00006).abs() < 1e-9);
        assert!(r.to_string().contains("Total per task"));
    }
}

//! Scenario traces: one JSON object per line, each carrying a balance snapshot.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::contract::{CallOutcome, TaskId};
use crate::crypto::sha256;
use crate::enclave::InstanceId;
use crate::ledger::{AccountId, LedgerEvent, Supply, Tier};
use crate::money::Money;

use super::{ScenarioConfig, ScenarioOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum TraceRecord {
    #[serde(rename_all = "camelCase")]
    Start {
        config: Box<ScenarioConfig>,
        roles: BTreeMap<String, AccountId>,
    },
    #[serde(rename_all = "camelCase")]
    Call {
        actor: String,
        function: String,
        task_id: Option<TaskId>,
        value: Money,
        tier: Tier,
        outcome: CallOutcome,
        gas_used: u64,
        gas_cost: Money,
    },
    #[serde(rename_all = "camelCase")]
    CallFailed {
        actor: String,
        function: String,
        error: String,
    },
    Event {
        event: LedgerEvent,
    },
    #[serde(rename_all = "camelCase")]
    Enclave {
        actor: String,
        op: String,
        instance: InstanceId,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    #[serde(rename_all = "camelCase")]
    Execution {
        actor: String,
        instance: InstanceId,
        cost: Money,
    },
    #[serde(rename_all = "camelCase")]
    Message {
        from: String,
        to: String,
        what: String,
        task_id: TaskId,
        tampered: bool,
    },
    #[serde(rename_all = "camelCase")]
    ResultChecked {
        actor: String,
        task_id: TaskId,
        valid: bool,
        opened: bool,
        value_credited: Money,
    },
    Tick {
        now: u64,
    },
    #[serde(rename_all = "camelCase")]
    Final {
        contract: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    pub step: u64,
    pub time: u64,
    pub block_height: u64,
    #[serde(flatten)]
    pub record: TraceRecord,
    pub balances: BTreeMap<String, Money>,
    pub supply: Supply,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace is malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("trace entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line).map_err(|source| TraceError::Parse {
                line: i + 1,
                source,
            })?;
            entries.push(entry);
        }
        Ok(Trace { entries })
    }

    /// Hex SHA-256 of the JSON-lines encoding.
    pub fn id(&self) -> String {
        sha256(self.to_jsonl().as_bytes()).to_hex()
    }

    pub fn config(&self) -> Option<&ScenarioConfig> {
        self.entries.iter().find_map(|e| match &e.record {
            TraceRecord::Start { config, .. } => Some(config.as_ref()),
            _ => None,
        })
    }

    pub fn contract_state(&self) -> Option<&serde_json::Value> {
        self.entries.iter().rev().find_map(|e| match &e.record {
            TraceRecord::Final { contract } => Some(contract),
            _ => None,
        })
    }

    /// Steps at which the balance sheet does not add up.
    pub fn conservation_failures(&self) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| {
                let accounts: Money = e
                    .balances
                    .iter()
                    .filter(|(k, _)| k.as_str() != "contract")
                    .map(|(_, m)| *m)
                    .sum();
                let total = accounts
                    .checked_add(e.supply.contract)
                    .and_then(|m| m.checked_add(e.supply.burned));
                total != Some(e.supply.minted) || accounts != e.supply.accounts
            })
            .map(|e| e.step)
            .collect()
    }

    /// Rebuilds the outcome from the recorded entries alone.
    pub fn reconstruct_outcome(&self) -> Result<ScenarioOutcome, TraceError> {
        let malformed = |m: &str| TraceError::Malformed(m.to_string());
        let first = self
            .entries
            .first()
            .ok_or_else(|| malformed("empty trace"))?;
        let last = self.entries.last().expect("non-empty");
        let config = self.config().ok_or_else(|| malformed("no start record"))?;
        let start_time = first.time;

        let mut gas: BTreeMap<String, Money> = first
            .balances
            .keys()
            .filter(|k| k.as_str() != "contract")
            .map(|k| (k.clone(), Money::ZERO))
            .collect();
        let mut compute: BTreeMap<String, Money> = BTreeMap::new();
        let mut credited = Money::ZERO;
        let mut received = false;
        let mut executed = false;
        let mut claimant: Option<String> = None;
        for e in &self.entries {
            match &e.record {
                TraceRecord::Call {
                    actor,
                    function,
                    outcome,
                    gas_cost,
                    ..
                } => {
                    let g = gas.entry(actor.clone()).or_default();
                    *g = g
                        .checked_add(*gas_cost)
                        .ok_or_else(|| malformed("gas overflow"))?;
                    if function == "claimTask"
                        && *outcome == CallOutcome::Accepted
                        && claimant.is_none()
                    {
                        claimant = Some(actor.clone());
                    }
                }
                TraceRecord::Execution { actor, cost, .. } => {
                    executed = true;
                    let c = compute.entry(actor.clone()).or_default();
                    *c = c
                        .checked_add(*cost)
                        .ok_or_else(|| malformed("cost overflow"))?;
                }
                TraceRecord::ResultChecked {
                    valid,
                    value_credited,
                    ..
                } => {
                    received |= *valid;
                    credited = credited
                        .checked_add(*value_credited)
                        .ok_or_else(|| malformed("value overflow"))?;
                }
                _ => {}
            }
        }

        let delta = |role: &str| -> Result<i128, TraceError> {
            let before = first
                .balances
                .get(role)
                .ok_or_else(|| TraceError::Malformed(format!("no initial balance for {role}")))?;
            let after = last
                .balances
                .get(role)
                .ok_or_else(|| TraceError::Malformed(format!("no final balance for {role}")))?;
            Ok(after.signed() - before.signed())
        };
        let gas_of = |role: &str| gas.get(role).copied().unwrap_or_default().signed();

        let requestor_with_gas = delta("requestor")? + credited.signed();
        let requestor = requestor_with_gas + gas_of("requestor");
        let mut node_payoffs = BTreeMap::new();
        let mut node_payoffs_with_gas = BTreeMap::new();
        for role in first.balances.keys().filter(|k| k.starts_with("node")) {
            let with_gas = delta(role)? - compute.get(role).copied().unwrap_or_default().signed();
            node_payoffs_with_gas.insert(role.clone(), with_gas);
            node_payoffs.insert(role.clone(), with_gas + gas_of(role));
        }
        let primary = claimant.unwrap_or_else(|| "node0".to_string());
        let node = *node_payoffs
            .get(&primary)
            .ok_or_else(|| malformed("claimant has no balance"))?;
        let node_with_gas = node_payoffs_with_gas[&primary];

        Ok(ScenarioOutcome {
            requestor_strategy: config.requestor,
            node_strategy: config.node,
            requestor_payoff: requestor,
            node_payoff: node,
            requestor_payoff_with_gas: requestor_with_gas,
            node_payoff_with_gas: node_with_gas,
            node_payoffs,
            claimant: primary,
            locked_in_contract: last.supply.contract,
            gas_by_party: gas,
            result_received: received,
            executed,
            elapsed: last.time - start_time,
            trace_id: self.id(),
        })
    }
}

//! Scenario runner.
//!
//! A run wires one requestor, one or more execution nodes and an optional
//! third-party receiver to a fresh ledger, then pumps observations through a
//! FIFO queue until nothing is left to do. When the queue drains while the
//! requestor still waits on a task, the clock jumps past the task deadline and
//! the requestor gets a tick. Every step lands in the trace together with a
//! balance snapshot, and the run-wide invariants are checked as it goes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actors::{
    Action, ExecutionNodeActor, NodeStrategy, Observation, ProtocolStep, RequestorActor,
    RequestorStrategy, TaskRequest, ThirdPartyActor,
};
use crate::contract::{ContractCall, TaskId};
use crate::enclave::{
    EnclaveError, EnclaveInstance, FlowLedger, FunctionStore, InstanceId, Label, Principal,
    ResourceMeter,
};
use crate::ledger::{AccountId, Ledger, LedgerConfig, Tier};
use crate::money::{signed_string, Money};

pub mod payoffs;
pub mod reports;
pub mod trace;

pub use payoffs::{
    closed_form, dominance_check, payoff_matrix, DominanceReport, MatrixCell, NamedScenario,
    ParamGrid, PayoffMatrix, PayoffParams, RandomGrid,
};
pub use reports::{gas_report, latency_report, GasReport, LatencyReport};
pub use trace::{Trace, TraceEntry, TraceError, TraceRecord};

/// Upper bound on queue steps in one run.
pub const MAX_STEPS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("scenario did not settle within {0} steps")]
    StepLimit(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Destination {
    Requestor,
    ThirdParty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub requestor: RequestorStrategy,
    pub node: NodeStrategy,
    /// V: what a valid result is worth to the requestor.
    pub value_of_result: Money,
    /// P: payment escrowed for the execution node.
    pub payment: Money,
    /// C: compute cost of one execution. Overrides the image's resource cost.
    pub cost: Option<Money>,
    /// D_E. Defaults to the contract threshold.
    pub node_deposit: Option<Money>,
    pub expires: u64,
    pub tier: Tier,
    pub seed: u64,
    /// Ledger seconds that pass while the enclave computes.
    pub execution_delay: u64,
    /// Number of execution nodes racing for the task; all share one strategy.
    pub nodes: usize,
    pub destination: Destination,
    /// Flip a ciphertext bit while the result is in transit.
    pub tamper_delivery: bool,
    pub max_resubmits: u32,
    pub function: String,
    pub inputs: String,
    pub initial_balance: Money,
    /// Function manifest; the built-in store is used when absent.
    pub functions: Option<PathBuf>,
    pub ledger: LedgerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            requestor: RequestorStrategy::Honest,
            node: NodeStrategy::Honest,
            value_of_result: Money::ether(100),
            payment: Money::ether(10),
            cost: Some(Money::ether(3)),
            node_deposit: None,
            expires: 3600,
            tier: Tier::Standard,
            seed: 0,
            execution_delay: 0,
            nodes: 1,
            destination: Destination::Requestor,
            tamper_delivery: false,
            max_resubmits: 0,
            function: "sha256".to_string(),
            inputs: "hello, enclave".to_string(),
            initial_balance: Money::ether(1000),
            functions: None,
            ledger: LedgerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn threshold(&self) -> Money {
        self.ledger.threshold
    }

    /// D_R: always the contract threshold.
    pub fn requestor_deposit(&self) -> Money {
        self.ledger.threshold
    }

    pub fn node_deposit(&self) -> Money {
        self.node_deposit.unwrap_or(self.ledger.threshold)
    }

    pub fn function_store(&self) -> Result<FunctionStore, HarnessError> {
        let mut store = match &self.functions {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
                FunctionStore::from_manifest(&text)
                    .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?
            }
            None => FunctionStore::builtin(self.cost.unwrap_or(Money::ether(3))),
        };
        let mut image = store
            .get(&self.function)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?
            .clone();
        if let Some(cost) = self.cost {
            image.resource_cost = cost;
            store.insert(image);
        }
        Ok(store)
    }

    /// C as the node will actually be charged.
    pub fn function_cost(&self) -> Result<Money, HarnessError> {
        Ok(self
            .function_store()?
            .get(&self.function)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?
            .resource_cost)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.ledger.threshold.is_zero() {
            return invalid("threshold must be positive".into());
        }
        if let Err(e) = self.ledger.gas.validate() {
            return invalid(e);
        }
        if self.nodes == 0 || self.nodes > 64 {
            return invalid(format!("nodes must be in 1..=64, got {}", self.nodes));
        }
        if self.node_deposit() < self.ledger.threshold {
            return invalid(format!(
                "node deposit {} is below the threshold {}",
                self.node_deposit(),
                self.ledger.threshold
            ));
        }
        if self.payment.checked_add(self.ledger.threshold).is_none() {
            return invalid("payment plus deposit overflows".into());
        }
        if self
            .value_of_result
            .checked_add(self.initial_balance)
            .is_none()
        {
            return invalid("value of result is too large".into());
        }
        self.function_store()?;
        Ok(())
    }

    fn task_request(&self) -> TaskRequest {
        TaskRequest {
            function_name: self.function.clone(),
            inputs: self.inputs.as_bytes().to_vec(),
            value_of_result: self.value_of_result,
            offered_payment: self.payment,
            expires: self.expires,
            tier: self.tier,
        }
    }
}

/// Per-party result of one run. Money and payoffs share one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioOutcome {
    pub requestor_strategy: RequestorStrategy,
    pub node_strategy: NodeStrategy,
    /// Balance change plus V if a valid result arrived; gas excluded.
    #[serde(with = "signed_string")]
    pub requestor_payoff: i128,
    /// Claimant's balance change minus C per execution; gas excluded.
    #[serde(with = "signed_string")]
    pub node_payoff: i128,
    #[serde(with = "signed_string")]
    pub requestor_payoff_with_gas: i128,
    #[serde(with = "signed_string")]
    pub node_payoff_with_gas: i128,
    #[serde(with = "signed_payoff_map")]
    pub node_payoffs: BTreeMap<String, i128>,
    /// Role whose `node_payoff` is reported: the accepted claimant, else `node0`.
    pub claimant: String,
    pub locked_in_contract: Money,
    pub gas_by_party: BTreeMap<String, Money>,
    pub result_received: bool,
    pub executed: bool,
    /// Ledger seconds from start to the last step.
    pub elapsed: u64,
    pub trace_id: String,
}

mod signed_payoff_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, i128>, s: S) -> Result<S::Ok, S::Error> {
        let as_str: BTreeMap<&String, String> = m.iter().map(|(k, v)| (k, v.to_string())).collect();
        as_str.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, i128>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| v.parse().map(|v| (k, v)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Run-wide invariant checks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InvariantReport {
    pub conservation: bool,
    pub escrow_matches_contract: bool,
    pub sequential_calls: bool,
    pub clock_monotone: bool,
    pub information_flow: bool,
    pub problems: Vec<String>,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.conservation
            && self.escrow_matches_contract
            && self.sequential_calls
            && self.clock_monotone
            && self.information_flow
    }
}

/// Everything a run produced.
#[derive(Debug)]
pub struct ScenarioRun {
    pub outcome: ScenarioOutcome,
    pub trace: Trace,
    pub invariants: InvariantReport,
    pub ledger: Ledger,
    pub flow: FlowLedger,
    pub requestor_log: Vec<ProtocolStep>,
    pub node_logs: Vec<Vec<ProtocolStep>>,
    pub submitted_hashes: Vec<crate::crypto::Digest>,
    pub requestor_result: Option<Vec<u8>>,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, HarnessError> {
    config.validate()?;
    Sim::new(config)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Who {
    Requestor,
    Node(usize),
    ThirdParty,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    ledger: Ledger,
    flow: FlowLedger,
    meter: ResourceMeter,
    store: FunctionStore,
    enclave_rng: ChaCha20Rng,
    race_rng: ChaCha20Rng,
    requestor: RequestorActor,
    nodes: Vec<ExecutionNodeActor>,
    third_party: Option<ThirdPartyActor>,
    instances: BTreeMap<InstanceId, EnclaveInstance>,
    next_instance: u64,
    queue: VecDeque<(Who, Observation)>,
    in_flight: BTreeSet<Who>,
    roles: Vec<(String, AccountId)>,
    trace: Vec<TraceEntry>,
    step: u64,
    value_received: bool,
    execute_steps: BTreeMap<AccountId, u64>,
    last_block: u64,
    last_time: u64,
    report: InvariantReport,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self, HarnessError> {
        let mut seeds = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut ledger = Ledger::new(&cfg.ledger);
        let store = cfg.function_store()?;

        let requestor_acct = ledger.create_account(cfg.initial_balance);
        let node_accts: Vec<AccountId> = (0..cfg.nodes)
            .map(|_| ledger.create_account(cfg.initial_balance))
            .collect();
        let third_acct = match cfg.destination {
            Destination::ThirdParty => Some(ledger.create_account(Money::ZERO)),
            Destination::Requestor => None,
        };
        let destination = third_acct.unwrap_or(requestor_acct);

        let mut roles = vec![("requestor".to_string(), requestor_acct)];
        roles.extend(
            node_accts
                .iter()
                .enumerate()
                .map(|(i, a)| (format!("node{i}"), *a)),
        );
        if let Some(a) = third_acct {
            roles.push(("thirdParty".to_string(), a));
        }

        let allowed = BTreeSet::from([store
            .get(&cfg.function)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?
            .measurement()]);
        let requestor = RequestorActor::new(
            requestor_acct,
            cfg.requestor,
            cfg.task_request(),
            cfg.requestor_deposit(),
            destination,
            allowed,
            seeds.next_u64(),
            cfg.max_resubmits,
        );
        let nodes = node_accts
            .iter()
            .map(|a| {
                ExecutionNodeActor::new(*a, cfg.node, cfg.node_deposit(), cfg.tier, destination)
            })
            .collect();

        Ok(Sim {
            cfg,
            ledger,
            flow: FlowLedger::new(),
            meter: ResourceMeter::default(),
            store,
            enclave_rng: ChaCha20Rng::seed_from_u64(seeds.next_u64()),
            race_rng: ChaCha20Rng::seed_from_u64(seeds.next_u64()),
            requestor,
            nodes,
            third_party: third_acct.map(|a| ThirdPartyActor::new(a, requestor_acct)),
            instances: BTreeMap::new(),
            next_instance: 0,
            queue: VecDeque::new(),
            in_flight: BTreeSet::new(),
            roles,
            trace: Vec::new(),
            step: 0,
            value_received: false,
            execute_steps: BTreeMap::new(),
            last_block: 0,
            last_time: 0,
            report: InvariantReport {
                conservation: true,
                escrow_matches_contract: true,
                sequential_calls: true,
                clock_monotone: true,
                information_flow: true,
                problems: Vec::new(),
            },
        })
    }

    fn account(&self, who: Who) -> AccountId {
        match who {
            Who::Requestor => self.requestor.account(),
            Who::Node(i) => self.nodes[i].account(),
            Who::ThirdParty => self
                .third_party
                .as_ref()
                .expect("third party configured")
                .account(),
        }
    }

    fn who_of(&self, account: AccountId) -> Option<Who> {
        if account == self.requestor.account() {
            return Some(Who::Requestor);
        }
        if let Some(i) = self.nodes.iter().position(|n| n.account() == account) {
            return Some(Who::Node(i));
        }
        match &self.third_party {
            Some(t) if t.account() == account => Some(Who::ThirdParty),
            _ => None,
        }
    }

    fn role(&self, who: Who) -> String {
        match who {
            Who::Requestor => "requestor".to_string(),
            Who::Node(i) => format!("node{i}"),
            Who::ThirdParty => "thirdParty".to_string(),
        }
    }

    fn problem(&mut self, msg: String) {
        self.report.problems.push(msg);
    }

    fn record(&mut self, record: TraceRecord) {
        let mut balances: BTreeMap<String, Money> = self
            .roles
            .iter()
            .map(|(r, a)| (r.clone(), self.ledger.balance(*a)))
            .collect();
        balances.insert("contract".to_string(), self.ledger.contract_balance());
        let supply = self.ledger.supply();
        if !supply.is_conserved() {
            self.report.conservation = false;
            self.problem(format!(
                "step {}: supply not conserved: {supply:?}",
                self.step
            ));
        }
        let escrowed = self.ledger.contract().escrowed_total();
        if escrowed != supply.contract {
            self.report.escrow_matches_contract = false;
            self.problem(format!(
                "step {}: contract holds {} but escrows {}",
                self.step, supply.contract, escrowed
            ));
        }
        let clock = self.ledger.clock();
        self.trace.push(TraceEntry {
            step: self.step,
            time: clock.now,
            block_height: clock.block_height,
            record,
            balances,
            supply,
        });
    }

    fn run(mut self) -> Result<ScenarioRun, HarnessError> {
        let roles = self.roles.iter().cloned().collect();
        self.record(TraceRecord::Start {
            config: Box::new(self.cfg.clone()),
            roles,
        });
        self.queue.push_back((Who::Requestor, Observation::Start));
        let mut last_tick: Option<u64> = None;
        loop {
            self.drain()?;
            let Some(deadline) = self.requestor.pending_deadline() else {
                break;
            };
            if last_tick == Some(deadline) {
                break;
            }
            last_tick = Some(deadline);
            let now = self.ledger.now();
            if now <= deadline {
                self.ledger.advance_time(deadline + 1 - now);
            }
            let now = self.ledger.now();
            self.record(TraceRecord::Tick { now });
            self.queue
                .push_back((Who::Requestor, Observation::Tick { now }));
        }
        self.finish()
    }

    fn drain(&mut self) -> Result<(), HarnessError> {
        while let Some((who, obs)) = self.queue.pop_front() {
            self.step += 1;
            if self.step > MAX_STEPS {
                return Err(HarnessError::StepLimit(MAX_STEPS));
            }
            self.flow.set_step(self.step);
            if matches!(obs, Observation::Receipt(_) | Observation::TxFailed { .. }) {
                self.in_flight.remove(&who);
            }
            let actions = match who {
                Who::Requestor => self.requestor.step(obs),
                Who::Node(i) => self.nodes[i].step(obs),
                Who::ThirdParty => match self.third_party.as_mut() {
                    Some(t) => t.step(obs),
                    None => Vec::new(),
                },
            };
            for action in actions {
                self.perform(who, action);
            }
        }
        Ok(())
    }

    fn perform(&mut self, who: Who, action: Action) {
        let actor = self.role(who);
        match action {
            Action::Ledger { call, value, tier } => self.transact(who, call, value, tier),
            Action::Instantiate {
                task,
                function_name,
            } => {
                let id = InstanceId(self.next_instance);
                self.next_instance += 1;
                let host = self.account(who);
                match self.store.instantiate(&function_name, id, host) {
                    Ok(instance) => {
                        let measurement = instance.measurement();
                        self.instances.insert(id, instance);
                        if let Who::Node(i) = who {
                            self.nodes[i].bind_instance(task, id);
                        }
                        self.record(TraceRecord::Enclave {
                            actor,
                            op: "instantiate".into(),
                            instance: id,
                            ok: true,
                            detail: None,
                        });
                        self.queue.push_back((
                            Who::Requestor,
                            Observation::EnclaveReady {
                                task,
                                node: host,
                                instance: id,
                                measurement,
                            },
                        ));
                    }
                    Err(e) => self.enclave_failure(actor, "instantiate", id, &e),
                }
            }
            Action::Attest {
                task,
                instance,
                expected,
            } => {
                let requestor = self.requestor.account();
                let verifier = self.requestor.verifier_mut();
                let nonce = verifier.fresh_nonce();
                let result = match self.instances.get_mut(&instance) {
                    Some(inst) => inst
                        .attest(requestor, &expected, nonce, verifier)
                        .map(|_| ()),
                    None => Err(EnclaveError::NotAttested),
                };
                match result {
                    Ok(()) => {
                        self.record(TraceRecord::Enclave {
                            actor,
                            op: "attest".into(),
                            instance,
                            ok: true,
                            detail: None,
                        });
                        self.queue
                            .push_back((Who::Requestor, Observation::Attested { task, instance }));
                    }
                    Err(e) => {
                        self.enclave_failure(actor, "attest", instance, &e);
                        self.queue.push_back((
                            Who::Requestor,
                            Observation::AttestationFailed {
                                task,
                                reason: e.to_string(),
                            },
                        ));
                    }
                }
            }
            Action::Provision {
                task,
                instance,
                secret,
                inputs,
                keys,
            } => {
                let from = self.account(who);
                let result = match self.instances.get_mut(&instance) {
                    Some(inst) => inst
                        .provision(from, task, secret, inputs, keys, &mut self.flow)
                        .map(|_| inst.host()),
                    None => Err(EnclaveError::NotAttested),
                };
                match result {
                    Ok(host) => {
                        self.record(TraceRecord::Enclave {
                            actor,
                            op: "provision".into(),
                            instance,
                            ok: true,
                            detail: None,
                        });
                        if let Some(node) = self.who_of(host) {
                            self.queue
                                .push_back((node, Observation::Provisioned { task, instance }));
                        }
                    }
                    Err(e) => self.enclave_failure(actor, "provision", instance, &e),
                }
            }
            Action::Execute { task, instance } => {
                if self.cfg.execution_delay > 0 {
                    self.ledger.advance_time(self.cfg.execution_delay);
                }
                let Some(inst) = self.instances.get_mut(&instance) else {
                    self.enclave_failure(actor, "execute", instance, &EnclaveError::NotAttested);
                    return;
                };
                let host = inst.host();
                let before = self.meter.consumed(host);
                let result = inst.execute(&mut self.meter, &mut self.flow, &mut self.enclave_rng);
                let cost = self.meter.consumed(host).saturating_sub(before);
                if inst.state() == crate::enclave::EnclaveState::Executed {
                    self.execute_steps.entry(host).or_insert(self.step);
                    self.record(TraceRecord::Execution {
                        actor: actor.clone(),
                        instance,
                        cost,
                    });
                }
                match result {
                    Ok(release) => {
                        self.queue
                            .push_back((who, Observation::Executed { instance, release }));
                    }
                    Err(e) => {
                        self.enclave_failure(actor, "execute", instance, &e);
                        self.queue.push_back((
                            who,
                            Observation::ExecutionFailed {
                                task,
                                reason: e.to_string(),
                            },
                        ));
                    }
                }
            }
            Action::Destroy { instance } => {
                if let Some(inst) = self.instances.get_mut(&instance) {
                    inst.destroy(&mut self.flow);
                    self.record(TraceRecord::Enclave {
                        actor,
                        op: "destroy".into(),
                        instance,
                        ok: true,
                        detail: None,
                    });
                }
            }
            Action::Deliver {
                task,
                to,
                mut result,
            } => {
                let tampered = self.cfg.tamper_delivery;
                if tampered {
                    if let Some(b) = result.ciphertext.first_mut() {
                        *b ^= 0x01;
                    }
                }
                let from = self.account(who);
                match self.who_of(to) {
                    Some(dest) => {
                        self.record(TraceRecord::Message {
                            from: actor,
                            to: self.role(dest),
                            what: "result".into(),
                            task_id: task,
                            tampered,
                        });
                        self.queue
                            .push_back((dest, Observation::ResultDelivered { task, from, result }));
                    }
                    None => self.problem(format!("{actor} delivered to unknown account {to}")),
                }
            }
            Action::ShareVerifyingKey { task, to, key } => {
                if let Some(dest) = self.who_of(to) {
                    self.record(TraceRecord::Message {
                        from: actor,
                        to: self.role(dest),
                        what: "verifyingKey".into(),
                        task_id: task,
                        tampered: false,
                    });
                    self.queue
                        .push_back((dest, Observation::VerifyingKey { task, key }));
                }
            }
            Action::Acknowledge { task, to, valid } => {
                if let Some(dest) = self.who_of(to) {
                    self.record(TraceRecord::Message {
                        from: actor,
                        to: self.role(dest),
                        what: if valid { "ack" } else { "nack" }.into(),
                        task_id: task,
                        tampered: false,
                    });
                    self.queue
                        .push_back((dest, Observation::DeliveryAck { task, valid }));
                }
            }
            Action::ResultChecked {
                task,
                valid,
                opened,
            } => {
                let credited = if valid && !self.value_received {
                    self.value_received = true;
                    self.cfg.value_of_result
                } else {
                    Money::ZERO
                };
                if valid && opened {
                    self.flow.grant(
                        Label::PlaintextResult(task),
                        Principal::Requestor(self.requestor.account()),
                    );
                }
                self.record(TraceRecord::ResultChecked {
                    actor,
                    task_id: task,
                    valid,
                    opened,
                    value_credited: credited,
                });
            }
        }
    }

    fn enclave_failure(&mut self, actor: String, op: &str, instance: InstanceId, e: &EnclaveError) {
        self.record(TraceRecord::Enclave {
            actor,
            op: op.to_string(),
            instance,
            ok: false,
            detail: Some(e.to_string()),
        });
    }

    fn transact(&mut self, who: Who, call: ContractCall, value: Money, tier: Tier) {
        let actor = self.role(who);
        if !self.in_flight.insert(who) {
            self.report.sequential_calls = false;
            self.problem(format!(
                "{actor} issued {} before its previous call was confirmed",
                call.function_name()
            ));
        }
        if let ContractCall::FinalizeExecutionNode { task_id, .. } = &call {
            // Calldata is public whether or not the call succeeds.
            self.flow.grant(Label::Secret(*task_id), Principal::Public);
        }
        let sender = self.account(who);
        match self.ledger.submit_transaction(sender, &call, value, tier) {
            Ok(receipt) => {
                if receipt.block_height <= self.last_block || receipt.timestamp < self.last_time {
                    self.report.clock_monotone = false;
                    self.problem(format!("{actor}: receipt out of order"));
                }
                self.last_block = receipt.block_height;
                self.last_time = receipt.timestamp;
                let task_id = match receipt.outcome {
                    crate::contract::CallOutcome::TaskCreated { task_id } => Some(task_id),
                    _ => call.task_id(),
                };
                self.record(TraceRecord::Call {
                    actor,
                    function: receipt.function.clone(),
                    task_id,
                    value,
                    tier,
                    outcome: receipt.outcome,
                    gas_used: receipt.gas_used,
                    gas_cost: receipt.gas_cost,
                });
                let events = receipt.events.clone();
                for e in &events {
                    self.record(TraceRecord::Event { event: e.clone() });
                }
                self.queue.push_back((who, Observation::Receipt(receipt)));
                for e in events {
                    self.queue
                        .push_back((Who::Requestor, Observation::Event(e.clone())));
                    let mut order: Vec<usize> = (0..self.nodes.len()).collect();
                    order.shuffle(&mut self.race_rng);
                    for i in order {
                        self.queue
                            .push_back((Who::Node(i), Observation::Event(e.clone())));
                    }
                }
            }
            Err(e) => {
                self.record(TraceRecord::CallFailed {
                    actor,
                    function: call.function_name().to_string(),
                    error: e.to_string(),
                });
                self.queue.push_back((
                    who,
                    Observation::TxFailed {
                        function: call.function_name().to_string(),
                        error: e.to_string(),
                    },
                ));
            }
        }
    }

    fn check_information_flow(&mut self) {
        let tasks: Vec<TaskId> = (0..self.ledger.contract().num_tasks())
            .map(TaskId)
            .collect();
        let hosts: Vec<AccountId> = self.nodes.iter().map(|n| n.account()).collect();
        for host in hosts {
            let p = Principal::Host(host);
            for &t in &tasks {
                for label in [
                    Label::EncryptionKey(t),
                    Label::SigningKey(t),
                    Label::PlaintextResult(t),
                    Label::Inputs(t),
                ] {
                    if self.flow.ever_granted(label, p) {
                        self.report.information_flow = false;
                        self.problem(format!("host {host} saw {label:?}"));
                    }
                }
                if let Some(seen) = self.flow.first_grant(Label::Secret(t), p) {
                    match self.execute_steps.get(&host) {
                        Some(exec) if seen >= *exec => {}
                        _ => {
                            self.report.information_flow = false;
                            self.problem(format!(
                                "host {host} saw the secret of task {t} before executing"
                            ));
                        }
                    }
                }
            }
        }
        if !self.flow.violations().is_empty() {
            self.report.information_flow = false;
            let v = self.flow.violations().to_vec();
            self.problem(format!("flow violations: {v:?}"));
        }
    }

    fn finish(mut self) -> Result<ScenarioRun, HarnessError> {
        self.check_information_flow();
        let contract = self.ledger.contract_state_json();
        self.record(TraceRecord::Final { contract });
        let trace = Trace {
            entries: std::mem::take(&mut self.trace),
        };

        let first = &trace.entries[0];
        let delta = |role: &str, acct: AccountId| -> i128 {
            self.ledger.balance(acct).signed() - first.balances[role].signed()
        };
        let v = if self.value_received {
            self.cfg.value_of_result.signed()
        } else {
            0
        };
        let requestor_acct = self.requestor.account();
        let requestor_with_gas = delta("requestor", requestor_acct) + v;
        let requestor_payoff =
            requestor_with_gas + self.ledger.gas_paid_by(requestor_acct).signed();

        let mut node_payoffs = BTreeMap::new();
        let mut node_with_gas = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let role = format!("node{i}");
            let acct = n.account();
            let with_gas = delta(&role, acct) - self.meter.consumed(acct).signed();
            node_with_gas.insert(role.clone(), with_gas);
            node_payoffs.insert(role, with_gas + self.ledger.gas_paid_by(acct).signed());
        }
        let first_task = TaskId(0);
        let claimant = self
            .nodes
            .iter()
            .position(|n| n.claimed_task() == Some(first_task))
            .map(|i| format!("node{i}"))
            .unwrap_or_else(|| "node0".to_string());

        let gas_by_party = self
            .roles
            .iter()
            .map(|(r, a)| (r.clone(), self.ledger.gas_paid_by(*a)))
            .collect();

        let outcome = ScenarioOutcome {
            requestor_strategy: self.cfg.requestor,
            node_strategy: self.cfg.node,
            requestor_payoff,
            node_payoff: node_payoffs[&claimant],
            requestor_payoff_with_gas: requestor_with_gas,
            node_payoff_with_gas: node_with_gas[&claimant],
            node_payoffs,
            claimant,
            locked_in_contract: self.ledger.contract_balance(),
            gas_by_party,
            result_received: self.value_received,
            executed: !self.execute_steps.is_empty(),
            elapsed: self.ledger.now() - first.time,
            trace_id: trace.id(),
        };

        Ok(ScenarioRun {
            outcome,
            invariants: self.report,
            flow: self.flow,
            requestor_log: self.requestor.log().to_vec(),
            node_logs: self.nodes.iter().map(|n| n.log().to_vec()).collect(),
            submitted_hashes: self.requestor.submitted_hashes().to_vec(),
            requestor_result: self.requestor.result().map(<[u8]>::to_vec),
            trace,
            ledger: self.ledger,
        })
    }
}

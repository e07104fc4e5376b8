//! Requestor, execution node and third-party receiver as deterministic state
//! machines. Each `step` consumes one observation and returns the actions the
//! harness should carry out. Actors never touch the ledger or enclaves directly.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::VerifyingKey;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::contract::{CallOutcome, ContractCall, EventKind, TaskId};
use crate::crypto::{self, Digest, ProtectedResult, ResultKeys, Secret};
use crate::enclave::{AttestationVerifier, InstanceId, Release};
use crate::ledger::{AccountId, LedgerEvent, Receipt, Tier};
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestorStrategy {
    Honest,
    /// Takes a valid result but never calls `finalizeRequestor`.
    NoConfirm,
    /// Submits, but never attests or provisions the claimant's enclave.
    WithholdInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeStrategy {
    Honest,
    /// Claims and then does nothing.
    ClaimOnly,
    /// Executes and recovers its deposit, but never delivers the result.
    ComputeNoDeliver,
}

impl RequestorStrategy {
    pub const ALL: [RequestorStrategy; 3] = [
        RequestorStrategy::Honest,
        RequestorStrategy::NoConfirm,
        RequestorStrategy::WithholdInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RequestorStrategy::Honest => "honest",
            RequestorStrategy::NoConfirm => "no-confirm",
            RequestorStrategy::WithholdInput => "withhold-input",
        }
    }
}

impl NodeStrategy {
    pub const ALL: [NodeStrategy; 3] = [
        NodeStrategy::Honest,
        NodeStrategy::ClaimOnly,
        NodeStrategy::ComputeNoDeliver,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeStrategy::Honest => "honest",
            NodeStrategy::ClaimOnly => "claim-only",
            NodeStrategy::ComputeNoDeliver => "compute-no-deliver",
        }
    }
}

impl fmt::Display for RequestorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for NodeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RequestorStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!("unknown requestor strategy {s:?} (honest|no-confirm|withhold-input)")
            })
    }
}

impl FromStr for NodeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!("unknown node strategy {s:?} (honest|claim-only|compute-no-deliver)")
            })
    }
}

/// What the requestor wants computed and what it is worth to them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRequest {
    pub function_name: String,
    pub inputs: Vec<u8>,
    pub value_of_result: Money,
    pub offered_payment: Money,
    pub expires: u64,
    pub tier: Tier,
}

impl TaskRequest {
    /// Value exceeds price, and price exceeds the compute cost.
    pub fn is_rational(&self, function_cost: Money) -> bool {
        self.value_of_result > self.offered_payment
            && self.offered_payment > function_cost
            && !function_cost.is_zero()
    }
}

/// Protocol-level steps, logged per actor in the order they were taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProtocolStep {
    SubmitTask,
    Attest,
    Provision,
    FinalizeRequestor,
    Timeout,
    ClaimTask,
    Instantiate,
    Execute,
    FinalizeExecutionNode,
    Deliver,
}

#[derive(Debug, Clone)]
pub enum Observation {
    Start,
    Event(LedgerEvent),
    Receipt(Receipt),
    TxFailed {
        function: String,
        error: String,
    },
    EnclaveReady {
        task: TaskId,
        node: AccountId,
        instance: InstanceId,
        measurement: Digest,
    },
    Attested {
        task: TaskId,
        instance: InstanceId,
    },
    AttestationFailed {
        task: TaskId,
        reason: String,
    },
    Provisioned {
        task: TaskId,
        instance: InstanceId,
    },
    Executed {
        instance: InstanceId,
        release: Release,
    },
    ExecutionFailed {
        task: TaskId,
        reason: String,
    },
    ResultDelivered {
        task: TaskId,
        from: AccountId,
        result: ProtectedResult,
    },
    VerifyingKey {
        task: TaskId,
        key: VerifyingKey,
    },
    DeliveryAck {
        task: TaskId,
        valid: bool,
    },
    Tick {
        now: u64,
    },
}

#[derive(Debug, Clone)]
pub enum Action {
    Ledger {
        call: ContractCall,
        value: Money,
        tier: Tier,
    },
    Instantiate {
        task: TaskId,
        function_name: String,
    },
    Attest {
        task: TaskId,
        instance: InstanceId,
        expected: Digest,
    },
    Provision {
        task: TaskId,
        instance: InstanceId,
        secret: Secret,
        inputs: Vec<u8>,
        keys: ResultKeys,
    },
    Execute {
        task: TaskId,
        instance: InstanceId,
    },
    Destroy {
        instance: InstanceId,
    },
    Deliver {
        task: TaskId,
        to: AccountId,
        result: ProtectedResult,
    },
    ShareVerifyingKey {
        task: TaskId,
        to: AccountId,
        key: VerifyingKey,
    },
    Acknowledge {
        task: TaskId,
        to: AccountId,
        valid: bool,
    },
    /// The requestor's verdict on a delivered result. `opened` is false when
    /// only a third party's acknowledgment was seen.
    ResultChecked {
        task: TaskId,
        valid: bool,
        opened: bool,
    },
}

impl Action {
    pub fn is_ledger(&self) -> bool {
        matches!(self, Action::Ledger { .. })
    }
}

/// Holds back ledger calls until the previous call's receipt has been seen.
#[derive(Debug, Clone, Default)]
struct Sequencer {
    in_flight: bool,
    deferred: VecDeque<Action>,
}

impl Sequencer {
    fn push(&mut self, action: Action, out: &mut Vec<Action>) {
        if self.in_flight {
            self.deferred.push_back(action);
        } else {
            self.in_flight = true;
            out.push(action);
        }
    }

    fn settled(&mut self, out: &mut Vec<Action>) {
        self.in_flight = false;
        if let Some(next) = self.deferred.pop_front() {
            self.in_flight = true;
            out.push(next);
        }
    }
}

#[derive(Debug, Clone)]
struct RequestorTask {
    id: Option<TaskId>,
    secret: Secret,
    keys: ResultKeys,
    start: u64,
    claimed_by: Option<AccountId>,
    completed: bool,
    timed_out: bool,
    timeout_sent: bool,
    finalized: bool,
    result_valid: bool,
    result: Option<Vec<u8>>,
}

pub struct RequestorActor {
    account: AccountId,
    strategy: RequestorStrategy,
    request: TaskRequest,
    deposit: Money,
    destination: AccountId,
    allowed_measurements: BTreeSet<Digest>,
    rng: ChaCha20Rng,
    verifier: AttestationVerifier,
    seq: Sequencer,
    task: Option<RequestorTask>,
    resubmits_left: u32,
    submitted_hashes: Vec<Digest>,
    log: Vec<ProtocolStep>,
}

impl RequestorActor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        account: AccountId,
        strategy: RequestorStrategy,
        request: TaskRequest,
        deposit: Money,
        destination: AccountId,
        allowed_measurements: BTreeSet<Digest>,
        seed: u64,
        max_resubmits: u32,
    ) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let verifier = AttestationVerifier::new(rng.next_u64());
        RequestorActor {
            account,
            strategy,
            request,
            deposit,
            destination,
            allowed_measurements,
            rng,
            verifier,
            seq: Sequencer::default(),
            task: None,
            resubmits_left: max_resubmits,
            submitted_hashes: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn account(&self) -> AccountId {
        self.account
    }

    pub fn strategy(&self) -> RequestorStrategy {
        self.strategy
    }

    pub fn log(&self) -> &[ProtocolStep] {
        &self.log
    }

    pub fn verifier_mut(&mut self) -> &mut AttestationVerifier {
        &mut self.verifier
    }

    /// Hash locks of every submission, in order.
    pub fn submitted_hashes(&self) -> &[Digest] {
        &self.submitted_hashes
    }

    pub fn current_task(&self) -> Option<TaskId> {
        self.task.as_ref().and_then(|t| t.id)
    }

    pub fn result(&self) -> Option<&[u8]> {
        self.task.as_ref().and_then(|t| t.result.as_deref())
    }

    /// Deadline after which this requestor would fall back to `timeout`.
    pub fn pending_deadline(&self) -> Option<u64> {
        let t = self.task.as_ref()?;
        t.id?;
        if t.finalized || t.timed_out || t.timeout_sent || t.result_valid {
            return None;
        }
        Some(t.start.saturating_add(self.request.expires))
    }

    fn is_mine(&self, id: TaskId) -> bool {
        self.current_task() == Some(id)
    }

    pub fn step(&mut self, obs: Observation) -> Vec<Action> {
        let mut out = Vec::new();
        match obs {
            Observation::Start => self.submit(&mut out),
            Observation::Receipt(r) => self.on_receipt(r, &mut out),
            Observation::TxFailed { .. } => self.seq.settled(&mut out),
            Observation::Event(e) => self.on_event(e, &mut out),
            Observation::EnclaveReady {
                task,
                node,
                instance,
                measurement,
            } => {
                let claimant = self.task.as_ref().and_then(|t| t.claimed_by);
                if self.is_mine(task)
                    && claimant == Some(node)
                    && self.strategy != RequestorStrategy::WithholdInput
                    && self.allowed_measurements.contains(&measurement)
                {
                    self.log.push(ProtocolStep::Attest);
                    out.push(Action::Attest {
                        task,
                        instance,
                        expected: measurement,
                    });
                }
            }
            Observation::Attested { task, instance } => {
                if let Some(t) = self.task.as_ref().filter(|t| t.id == Some(task)) {
                    self.log.push(ProtocolStep::Provision);
                    out.push(Action::Provision {
                        task,
                        instance,
                        secret: t.secret,
                        inputs: self.request.inputs.clone(),
                        keys: t.keys.clone(),
                    });
                }
            }
            Observation::ResultDelivered { task, result, .. } => {
                if let Some(t) = self.task.as_mut().filter(|t| t.id == Some(task)) {
                    let opened = crypto::open_result(&result, &t.keys).ok();
                    let valid = opened.is_some();
                    out.push(Action::ResultChecked {
                        task,
                        valid,
                        opened: true,
                    });
                    if valid && !t.result_valid {
                        t.result_valid = true;
                        t.result = opened;
                        self.confirm(&mut out);
                    }
                }
            }
            Observation::DeliveryAck { task, valid } => {
                if let Some(t) = self.task.as_mut().filter(|t| t.id == Some(task)) {
                    out.push(Action::ResultChecked {
                        task,
                        valid,
                        opened: false,
                    });
                    if valid && !t.result_valid {
                        t.result_valid = true;
                        self.confirm(&mut out);
                    }
                }
            }
            Observation::Tick { now } => self.on_tick(now, &mut out),
            Observation::AttestationFailed { .. }
            | Observation::Provisioned { .. }
            | Observation::Executed { .. }
            | Observation::ExecutionFailed { .. }
            | Observation::VerifyingKey { .. } => {}
        }
        out
    }

    fn submit(&mut self, out: &mut Vec<Action>) {
        let secret = crypto::generate_secret(self.rng.next_u64());
        let hash = secret.digest();
        let keys = ResultKeys::generate(&mut self.rng);
        self.submitted_hashes.push(hash);
        self.task = Some(RequestorTask {
            id: None,
            secret,
            keys,
            start: 0,
            claimed_by: None,
            completed: false,
            timed_out: false,
            timeout_sent: false,
            finalized: false,
            result_valid: false,
            result: None,
        });
        self.log.push(ProtocolStep::SubmitTask);
        let value = self
            .request
            .offered_payment
            .checked_add(self.deposit)
            .expect("payment plus deposit overflows");
        self.seq.push(
            Action::Ledger {
                call: ContractCall::SubmitTask {
                    function_name: self.request.function_name.clone(),
                    hash_lock: hash,
                    expires: self.request.expires,
                },
                value,
                tier: self.request.tier,
            },
            out,
        );
    }

    fn confirm(&mut self, out: &mut Vec<Action>) {
        if self.strategy == RequestorStrategy::NoConfirm {
            return;
        }
        let Some(t) = self.task.as_ref() else { return };
        let Some(id) = t.id else { return };
        if t.finalized || !t.completed {
            return;
        }
        self.log.push(ProtocolStep::FinalizeRequestor);
        self.seq.push(
            Action::Ledger {
                call: ContractCall::FinalizeRequestor { task_id: id },
                value: Money::ZERO,
                tier: self.request.tier,
            },
            out,
        );
    }

    fn on_receipt(&mut self, r: Receipt, out: &mut Vec<Action>) {
        self.seq.settled(out);
        let Some(t) = self.task.as_mut() else { return };
        match (r.function.as_str(), r.outcome) {
            ("submitTask", CallOutcome::TaskCreated { task_id }) => {
                t.id = Some(task_id);
                t.start = r.timestamp;
                if self.destination != self.account {
                    out.push(Action::ShareVerifyingKey {
                        task: task_id,
                        to: self.destination,
                        key: t.keys.verifying_key(),
                    });
                }
            }
            ("finalizeRequestor", CallOutcome::Accepted) => t.finalized = true,
            ("timeout", CallOutcome::Accepted) => {
                t.timed_out = true;
                if self.resubmits_left > 0 {
                    self.resubmits_left -= 1;
                    self.submit(out);
                }
            }
            _ => {}
        }
    }

    fn on_event(&mut self, e: LedgerEvent, out: &mut Vec<Action>) {
        if !self.is_mine(e.task_id) {
            return;
        }
        let t = self.task.as_mut().expect("is_mine implies a task");
        match e.kind {
            EventKind::TaskClaimed => {
                t.claimed_by = e.payload.get("executionNode").and_then(|s| s.parse().ok());
            }
            EventKind::TaskFinished => {
                t.completed = true;
                if t.result_valid {
                    self.confirm(out);
                }
            }
            EventKind::TaskSubmitted | EventKind::TaskTimedOut => {}
        }
    }

    /// Past the deadline without a usable result, fall back to `timeout`.
    fn on_tick(&mut self, now: u64, out: &mut Vec<Action>) {
        let Some(t) = self.task.as_mut() else { return };
        let Some(id) = t.id else { return };
        let deadline = t.start.saturating_add(self.request.expires);
        if now <= deadline || t.finalized || t.timed_out || t.timeout_sent || t.result_valid {
            return;
        }
        t.timeout_sent = true;
        self.log.push(ProtocolStep::Timeout);
        self.seq.push(
            Action::Ledger {
                call: ContractCall::Timeout { task_id: id },
                value: Money::ZERO,
                tier: self.request.tier,
            },
            out,
        );
    }
}

#[derive(Debug, Clone)]
struct NodeTask {
    id: TaskId,
    function_name: String,
    claimed: bool,
    instance: Option<InstanceId>,
    release: Option<Release>,
}

pub struct ExecutionNodeActor {
    account: AccountId,
    strategy: NodeStrategy,
    deposit: Money,
    tier: Tier,
    destination: AccountId,
    seq: Sequencer,
    task: Option<NodeTask>,
    log: Vec<ProtocolStep>,
}

impl ExecutionNodeActor {
    pub fn new(
        account: AccountId,
        strategy: NodeStrategy,
        deposit: Money,
        tier: Tier,
        destination: AccountId,
    ) -> Self {
        ExecutionNodeActor {
            account,
            strategy,
            deposit,
            tier,
            destination,
            seq: Sequencer::default(),
            task: None,
            log: Vec::new(),
        }
    }

    pub fn account(&self) -> AccountId {
        self.account
    }

    pub fn strategy(&self) -> NodeStrategy {
        self.strategy
    }

    pub fn log(&self) -> &[ProtocolStep] {
        &self.log
    }

    pub fn claimed_task(&self) -> Option<TaskId> {
        self.task.as_ref().filter(|t| t.claimed).map(|t| t.id)
    }

    pub fn step(&mut self, obs: Observation) -> Vec<Action> {
        let mut out = Vec::new();
        match obs {
            Observation::Event(e) if e.kind == EventKind::TaskSubmitted => {
                if self.task.is_none() {
                    let function_name = e.payload.get("functionName").cloned().unwrap_or_default();
                    self.task = Some(NodeTask {
                        id: e.task_id,
                        function_name,
                        claimed: false,
                        instance: None,
                        release: None,
                    });
                    self.log.push(ProtocolStep::ClaimTask);
                    self.seq.push(
                        Action::Ledger {
                            call: ContractCall::ClaimTask { task_id: e.task_id },
                            value: self.deposit,
                            tier: self.tier,
                        },
                        &mut out,
                    );
                }
            }
            Observation::Receipt(r) => self.on_receipt(r, &mut out),
            Observation::TxFailed { function, .. } => {
                self.seq.settled(&mut out);
                if function == "claimTask" {
                    self.task = None;
                }
            }
            Observation::Provisioned { task, instance } => {
                if self
                    .task
                    .as_ref()
                    .is_some_and(|t| t.id == task && t.instance == Some(instance))
                {
                    self.log.push(ProtocolStep::Execute);
                    out.push(Action::Execute { task, instance });
                }
            }
            Observation::Executed { instance, release } => {
                if let Some(t) = self.task.as_mut().filter(|t| t.instance == Some(instance)) {
                    self.log.push(ProtocolStep::FinalizeExecutionNode);
                    let call = ContractCall::FinalizeExecutionNode {
                        task_id: t.id,
                        secret: release.secret,
                    };
                    t.release = Some(release);
                    self.seq.push(
                        Action::Ledger {
                            call,
                            value: Money::ZERO,
                            tier: self.tier,
                        },
                        &mut out,
                    );
                }
            }
            _ => {}
        }
        out
    }

    fn on_receipt(&mut self, r: Receipt, out: &mut Vec<Action>) {
        self.seq.settled(out);
        let Some(t) = self.task.as_mut() else { return };
        match (r.function.as_str(), r.outcome) {
            ("claimTask", CallOutcome::Accepted) => {
                t.claimed = true;
                if self.strategy != NodeStrategy::ClaimOnly {
                    self.log.push(ProtocolStep::Instantiate);
                    out.push(Action::Instantiate {
                        task: t.id,
                        function_name: t.function_name.clone(),
                    });
                }
            }
            ("claimTask", CallOutcome::Refused { .. }) => self.task = None,
            ("finalizeExecutionNode", CallOutcome::Accepted) => {
                if let Some(release) = t.release.take() {
                    if self.strategy != NodeStrategy::ComputeNoDeliver {
                        self.log.push(ProtocolStep::Deliver);
                        out.push(Action::Deliver {
                            task: t.id,
                            to: self.destination,
                            result: release.result,
                        });
                    }
                }
                if let Some(instance) = t.instance {
                    out.push(Action::Destroy { instance });
                }
            }
            _ => {}
        }
    }

    /// Called by the harness once the enclave for the claimed task exists.
    pub fn bind_instance(&mut self, task: TaskId, instance: InstanceId) {
        if let Some(t) = self.task.as_mut().filter(|t| t.id == task) {
            t.instance = Some(instance);
        }
    }
}

/// Receives results on the requestor's behalf and acknowledges them.
pub struct ThirdPartyActor {
    account: AccountId,
    requestor: AccountId,
    key: Option<(TaskId, VerifyingKey)>,
    stored: Vec<ProtectedResult>,
}

impl ThirdPartyActor {
    pub fn new(account: AccountId, requestor: AccountId) -> Self {
        ThirdPartyActor {
            account,
            requestor,
            key: None,
            stored: Vec::new(),
        }
    }

    pub fn account(&self) -> AccountId {
        self.account
    }

    pub fn stored(&self) -> &[ProtectedResult] {
        &self.stored
    }

    pub fn step(&mut self, obs: Observation) -> Vec<Action> {
        match obs {
            Observation::VerifyingKey { task, key } => {
                self.key = Some((task, key));
                Vec::new()
            }
            Observation::ResultDelivered { task, result, .. } => {
                let valid = self
                    .key
                    .as_ref()
                    .is_some_and(|(t, k)| *t == task && result.verify_signature(k));
                if valid {
                    self.stored.push(result);
                }
                vec![Action::Acknowledge {
                    task,
                    to: self.requestor,
                    valid,
                }]
            }
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    const R: AccountId = AccountId([1; 20]);
    const N: AccountId = AccountId([2; 20]);

    fn request() -> TaskRequest {
        TaskRequest {
            function_name: "identity".into(),
            inputs: b"in".to_vec(),
            value_of_result: Money(100),
            offered_payment: Money(10),
            expires: 3600,
            tier: Tier::Fast,
        }
    }

    fn receipt(sender: AccountId, function: &str, outcome: CallOutcome, ts: u64) -> Receipt {
        Receipt {
            block_height: 1,
            timestamp: ts,
            sender,
            function: function.into(),
            value: Money::ZERO,
            tier: Tier::Fast,
            gas_used: 1,
            gas_cost: Money::ZERO,
            outcome,
            refunded: Money::ZERO,
            events: vec![],
        }
    }

    fn event(kind: EventKind, task: u64, payload: &[(&str, String)]) -> LedgerEvent {
        LedgerEvent {
            kind,
            task_id: TaskId(task),
            block_height: 1,
            payload: payload
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn strategy_names_parse() {
        for s in RequestorStrategy::ALL {
            assert_eq!(s.as_str().parse::<RequestorStrategy>().unwrap(), s);
        }
        for s in NodeStrategy::ALL {
            assert_eq!(s.as_str().parse::<NodeStrategy>().unwrap(), s);
        }
        assert!("greedy".parse::<NodeStrategy>().is_err());
    }

    #[test]
    fn rational_request() {
        assert!(request().is_rational(Money(3)));
        assert!(!request().is_rational(Money(10)));
        let mut r = request();
        r.value_of_result = Money(10);
        assert!(!r.is_rational(Money(3)));
    }

    #[test]
    fn requestor_waits_for_receipt_before_next_call() {
        let mut a = RequestorActor::new(
            R,
            RequestorStrategy::Honest,
            request(),
            Money(5),
            R,
            BTreeSet::new(),
            1,
            0,
        );
        let acts = a.step(Observation::Start);
        assert_eq!(acts.len(), 1);
        match &acts[0] {
            Action::Ledger { value, .. } => assert_eq!(*value, Money(15)),
            other => panic!("unexpected {other:?}"),
        }
        // A tick while the submit is in flight cannot produce a second call.
        assert!(a.step(Observation::Tick { now: 10_000 }).is_empty());
        a.step(Observation::Receipt(receipt(
            R,
            "submitTask",
            CallOutcome::TaskCreated { task_id: TaskId(0) },
            120,
        )));
        assert_eq!(a.current_task(), Some(TaskId(0)));
        assert!(a.step(Observation::Tick { now: 3720 }).is_empty());
        let acts = a.step(Observation::Tick { now: 3721 });
        assert!(matches!(
            acts.as_slice(),
            [Action::Ledger {
                call: ContractCall::Timeout { .. },
                ..
            }]
        ));
        assert!(a.step(Observation::Tick { now: 4000 }).is_empty());
    }

    #[test]
    fn withholding_requestor_ignores_enclave() {
        let mut a = RequestorActor::new(
            R,
            RequestorStrategy::WithholdInput,
            request(),
            Money(5),
            R,
            BTreeSet::from([Digest([7; 32])]),
            1,
            0,
        );
        a.step(Observation::Start);
        a.step(Observation::Receipt(receipt(
            R,
            "submitTask",
            CallOutcome::TaskCreated { task_id: TaskId(0) },
            1,
        )));
        a.step(Observation::Event(event(
            EventKind::TaskClaimed,
            0,
            &[("executionNode", N.to_string())],
        )));
        let acts = a.step(Observation::EnclaveReady {
            task: TaskId(0),
            node: N,
            instance: InstanceId(0),
            measurement: Digest([7; 32]),
        });
        assert!(acts.is_empty());
    }

    #[test]
    fn requestor_refuses_unlisted_measurement() {
        let mut a = RequestorActor::new(
            R,
            RequestorStrategy::Honest,
            request(),
            Money(5),
            R,
            BTreeSet::from([Digest([7; 32])]),
            1,
            0,
        );
        a.step(Observation::Start);
        a.step(Observation::Receipt(receipt(
            R,
            "submitTask",
            CallOutcome::TaskCreated { task_id: TaskId(0) },
            1,
        )));
        a.step(Observation::Event(event(
            EventKind::TaskClaimed,
            0,
            &[("executionNode", N.to_string())],
        )));
        let ready = |m| Observation::EnclaveReady {
            task: TaskId(0),
            node: N,
            instance: InstanceId(0),
            measurement: m,
        };
        assert!(a.step(ready(Digest([8; 32]))).is_empty());
        assert!(matches!(
            a.step(ready(Digest([7; 32]))).as_slice(),
            [Action::Attest { .. }]
        ));
    }

    #[test]
    fn resubmission_uses_a_fresh_secret() {
        let mut a = RequestorActor::new(
            R,
            RequestorStrategy::Honest,
            request(),
            Money(5),
            R,
            BTreeSet::new(),
            1,
            1,
        );
        a.step(Observation::Start);
        a.step(Observation::Receipt(receipt(
            R,
            "submitTask",
            CallOutcome::TaskCreated { task_id: TaskId(0) },
            1,
        )));
        a.step(Observation::Tick { now: 5000 });
        let acts = a.step(Observation::Receipt(receipt(
            R,
            "timeout",
            CallOutcome::Accepted,
            5001,
        )));
        assert!(matches!(
            acts.as_slice(),
            [Action::Ledger {
                call: ContractCall::SubmitTask { .. },
                ..
            }]
        ));
        let hashes = a.submitted_hashes();
        assert_eq!(hashes.len(), 2);
        assert_ne!(hashes[0], hashes[1]);
    }

    #[test]
    fn claim_only_node_stops_after_claim() {
        let mut n = ExecutionNodeActor::new(N, NodeStrategy::ClaimOnly, Money(5), Tier::Fast, R);
        let acts = n.step(Observation::Event(event(
            EventKind::TaskSubmitted,
            0,
            &[("functionName", "identity".into())],
        )));
        assert!(matches!(
            acts.as_slice(),
            [Action::Ledger {
                call: ContractCall::ClaimTask { .. },
                ..
            }]
        ));
        let acts = n.step(Observation::Receipt(receipt(
            N,
            "claimTask",
            CallOutcome::Accepted,
            2,
        )));
        assert!(acts.is_empty());
        assert_eq!(n.log(), [ProtocolStep::ClaimTask]);
        assert_eq!(n.claimed_task(), Some(TaskId(0)));
    }

    #[test]
    fn honest_node_instantiates_after_claim() {
        let mut n = ExecutionNodeActor::new(N, NodeStrategy::Honest, Money(5), Tier::Fast, R);
        n.step(Observation::Event(event(
            EventKind::TaskSubmitted,
            0,
            &[("functionName", "identity".into())],
        )));
        // A second submission while the first claim is pending is ignored.
        assert!(n
            .step(Observation::Event(event(EventKind::TaskSubmitted, 1, &[])))
            .is_empty());
        let acts = n.step(Observation::Receipt(receipt(
            N,
            "claimTask",
            CallOutcome::Accepted,
            2,
        )));
        assert!(matches!(acts.as_slice(), [Action::Instantiate { .. }]));
    }
}

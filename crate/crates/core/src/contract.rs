//! Escrow contract for hash-locked task payments.
//!
//! The contract is a pure state machine: it never touches balances directly.
//! Each call returns the payouts it wants made from the contract account and
//! the events it emits; the ledger applies both atomically.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Digest, Secret};
use crate::ledger::AccountId;
use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// On-chain escrow record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub function_name: String,
    pub hash_lock: Digest,
    pub requestor: AccountId,
    pub payment: Money,
    pub requestor_deposit: Money,
    pub execution_node: AccountId,
    pub execution_node_deposit: Money,
    pub claimed: bool,
    pub completed: bool,
    pub start: u64,
    pub expires: u64,
    /// Set by a successful timeout; deposits stay locked for good.
    pub timed_out: bool,
}

impl Task {
    pub fn state(&self) -> TaskState {
        match (self.timed_out, self.claimed, self.completed) {
            (true, _, _) => TaskState::TimedOutDead,
            (false, _, true) => TaskState::Completed,
            (false, true, false) => TaskState::Claimed,
            (false, false, false) => TaskState::Open,
        }
    }

    pub fn deadline(&self) -> u64 {
        self.start.saturating_add(self.expires)
    }

    /// Funds the contract must hold on behalf of this task.
    pub fn escrowed(&self) -> Money {
        let mut held = self.requestor_deposit;
        if !self.timed_out {
            held = held.checked_add(self.payment).expect("escrow overflow");
        }
        if self.claimed && !self.completed {
            held = held
                .checked_add(self.execution_node_deposit)
                .expect("escrow overflow");
        }
        held
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TaskState {
    Open,
    Claimed,
    Completed,
    /// Finalized by the requestor; the record is deleted.
    Closed,
    TimedOutDead,
}

/// Why a contract call returned `false`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Refusal {
    #[error("value below threshold")]
    ValueBelowThreshold,
    #[error("task already claimed")]
    AlreadyClaimed,
    #[error("task completed")]
    Completed,
    #[error("no such task")]
    NoSuchTask,
    #[error("sender is not the claimant")]
    NotClaimant,
    #[error("task not claimed")]
    NotClaimed,
    #[error("task already completed")]
    AlreadyCompleted,
    #[error("secret does not match hash lock")]
    BadSecret,
    #[error("sender is not the requestor")]
    NotRequestor,
    #[error("task not completed")]
    NotCompleted,
    #[error("task not expired")]
    NotExpired,
    #[error("task timed out")]
    TaskDead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "camelCase")]
pub enum ContractCall {
    #[serde(rename_all = "camelCase")]
    SubmitTask {
        function_name: String,
        hash_lock: Digest,
        expires: u64,
    },
    #[serde(rename_all = "camelCase")]
    ClaimTask { task_id: TaskId },
    #[serde(rename_all = "camelCase")]
    FinalizeExecutionNode { task_id: TaskId, secret: Secret },
    #[serde(rename_all = "camelCase")]
    FinalizeRequestor { task_id: TaskId },
    #[serde(rename_all = "camelCase")]
    Timeout { task_id: TaskId },
}

impl ContractCall {
    pub fn function_name(&self) -> &'static str {
        match self {
            ContractCall::SubmitTask { .. } => "submitTask",
            ContractCall::ClaimTask { .. } => "claimTask",
            ContractCall::FinalizeExecutionNode { .. } => "finalizeExecutionNode",
            ContractCall::FinalizeRequestor { .. } => "finalizeRequestor",
            ContractCall::Timeout { .. } => "timeout",
        }
    }

    pub fn task_id(&self) -> Option<TaskId> {
        match self {
            ContractCall::SubmitTask { .. } => None,
            ContractCall::ClaimTask { task_id }
            | ContractCall::FinalizeExecutionNode { task_id, .. }
            | ContractCall::FinalizeRequestor { task_id }
            | ContractCall::Timeout { task_id } => Some(*task_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum CallOutcome {
    #[serde(rename_all = "camelCase")]
    TaskCreated {
        task_id: TaskId,
    },
    Accepted,
    Refused {
        reason: Refusal,
    },
}

impl CallOutcome {
    pub fn is_success(&self) -> bool {
        !matches!(self, CallOutcome::Refused { .. })
    }

    pub fn refusal(&self) -> Option<Refusal> {
        match self {
            CallOutcome::Refused { reason } => Some(*reason),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    TaskSubmitted,
    TaskClaimed,
    TaskFinished,
    TaskTimedOut,
}

/// Event before the ledger stamps it with a block position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedEvent {
    pub kind: EventKind,
    pub task_id: TaskId,
    pub payload: BTreeMap<String, String>,
}

/// Transaction context visible to the contract.
#[derive(Debug, Clone, Copy)]
pub struct CallContext {
    pub sender: AccountId,
    /// Value already moved into the contract account.
    pub value: Money,
    pub now: u64,
}

/// Effects of one contract call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub outcome: CallOutcome,
    /// Transfers out of the contract account, in order.
    pub payouts: Vec<(AccountId, Money)>,
    pub events: Vec<EmittedEvent>,
}

impl Execution {
    fn refuse(reason: Refusal) -> Self {
        Execution {
            outcome: CallOutcome::Refused { reason },
            payouts: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Refusal that sends the attached value back, as the payable functions do.
    fn refund(reason: Refusal, ctx: &CallContext) -> Self {
        let mut e = Self::refuse(reason);
        if !ctx.value.is_zero() {
            e.payouts.push((ctx.sender, ctx.value));
        }
        e
    }

    pub fn refunded(&self, sender: AccountId) -> Money {
        match self.outcome {
            CallOutcome::Refused { .. } => self
                .payouts
                .iter()
                .filter(|(to, _)| *to == sender)
                .map(|(_, m)| *m)
                .sum(),
            _ => Money::ZERO,
        }
    }
}

/// Contract storage: the task table and its monotone id counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpocContract {
    threshold: Money,
    num_tasks: u64,
    tasks: BTreeMap<TaskId, Task>,
}

impl SpocContract {
    pub fn new(threshold: Money) -> Self {
        assert!(!threshold.is_zero(), "threshold must be positive");
        SpocContract {
            threshold,
            num_tasks: 0,
            tasks: BTreeMap::new(),
        }
    }

    pub fn threshold(&self) -> Money {
        self.threshold
    }

    pub fn num_tasks(&self) -> u64 {
        self.num_tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(&id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&TaskId, &Task)> {
        self.tasks.iter()
    }

    /// `None` for ids never handed out.
    pub fn task_state(&self, id: TaskId) -> Option<TaskState> {
        match self.tasks.get(&id) {
            Some(t) => Some(t.state()),
            None if id.0 < self.num_tasks => Some(TaskState::Closed),
            None => None,
        }
    }

    /// Total the contract account must hold across all live records.
    pub fn escrowed_total(&self) -> Money {
        self.tasks.values().map(Task::escrowed).sum()
    }

    pub fn apply(&mut self, ctx: &CallContext, call: &ContractCall) -> Execution {
        match call {
            ContractCall::SubmitTask {
                function_name,
                hash_lock,
                expires,
            } => self.submit_task(ctx, function_name, *hash_lock, *expires),
            ContractCall::ClaimTask { task_id } => self.claim_task(ctx, *task_id),
            ContractCall::FinalizeExecutionNode { task_id, secret } => {
                self.finalize_execution_node(ctx, *task_id, secret)
            }
            ContractCall::FinalizeRequestor { task_id } => self.finalize_requestor(ctx, *task_id),
            ContractCall::Timeout { task_id } => self.timeout(ctx, *task_id),
        }
    }

    fn submit_task(
        &mut self,
        ctx: &CallContext,
        function_name: &str,
        hash_lock: Digest,
        expires: u64,
    ) -> Execution {
        if ctx.value < self.threshold {
            return Execution::refund(Refusal::ValueBelowThreshold, ctx);
        }
        let task_id = TaskId(self.num_tasks);
        self.num_tasks += 1;
        let payment = ctx.value.saturating_sub(self.threshold);
        self.tasks.insert(
            task_id,
            Task {
                function_name: function_name.to_string(),
                hash_lock,
                requestor: ctx.sender,
                payment,
                requestor_deposit: self.threshold,
                execution_node: AccountId::NULL,
                execution_node_deposit: Money::ZERO,
                claimed: false,
                completed: false,
                start: ctx.now,
                expires,
                timed_out: false,
            },
        );
        let payload = BTreeMap::from([
            ("functionName".to_string(), function_name.to_string()),
            ("hashLock".to_string(), hash_lock.to_hex()),
            ("requestor".to_string(), ctx.sender.to_string()),
            ("payment".to_string(), payment.to_string()),
            ("requestorDeposit".to_string(), self.threshold.to_string()),
            ("expires".to_string(), expires.to_string()),
        ]);
        Execution {
            outcome: CallOutcome::TaskCreated { task_id },
            payouts: Vec::new(),
            events: vec![EmittedEvent {
                kind: EventKind::TaskSubmitted,
                task_id,
                payload,
            }],
        }
    }

    fn claim_task(&mut self, ctx: &CallContext, task_id: TaskId) -> Execution {
        if ctx.value < self.threshold {
            return Execution::refund(Refusal::ValueBelowThreshold, ctx);
        }
        let Some(task) = self.tasks.get_mut(&task_id) else {
            return Execution::refund(Refusal::NoSuchTask, ctx);
        };
        if task.claimed {
            return Execution::refund(Refusal::AlreadyClaimed, ctx);
        }
        if task.completed {
            return Execution::refund(Refusal::Completed, ctx);
        }
        if task.timed_out {
            return Execution::refund(Refusal::TaskDead, ctx);
        }
        task.execution_node = ctx.sender;
        task.execution_node_deposit = ctx.value;
        task.claimed = true;
        let payload = BTreeMap::from([
            ("executionNode".to_string(), ctx.sender.to_string()),
            ("executionNodeDeposit".to_string(), ctx.value.to_string()),
        ]);
        Execution {
            outcome: CallOutcome::Accepted,
            payouts: Vec::new(),
            events: vec![EmittedEvent {
                kind: EventKind::TaskClaimed,
                task_id,
                payload,
            }],
        }
    }

    fn finalize_execution_node(
        &mut self,
        ctx: &CallContext,
        task_id: TaskId,
        secret: &Secret,
    ) -> Execution {
        // A missing record reads as all-zero: executionNode is NULL, never a sender.
        let Some(task) = self.tasks.get_mut(&task_id) else {
            return Execution::refund(Refusal::NotClaimant, ctx);
        };
        let refusal = if task.execution_node != ctx.sender {
            Some(Refusal::NotClaimant)
        } else if !task.claimed {
            Some(Refusal::NotClaimed)
        } else if task.completed {
            Some(Refusal::AlreadyCompleted)
        } else if task.timed_out {
            Some(Refusal::TaskDead)
        } else if secret.digest() != task.hash_lock {
            Some(Refusal::BadSecret)
        } else {
            None
        };
        if let Some(r) = refusal {
            return Execution::refund(r, ctx);
        }
        task.completed = true;
        let mut payouts = vec![(ctx.sender, task.execution_node_deposit)];
        if !ctx.value.is_zero() {
            payouts.push((ctx.sender, ctx.value));
        }
        let payload = BTreeMap::from([
            ("executionNode".to_string(), ctx.sender.to_string()),
            ("secret".to_string(), secret.to_hex()),
        ]);
        Execution {
            outcome: CallOutcome::Accepted,
            payouts,
            events: vec![EmittedEvent {
                kind: EventKind::TaskFinished,
                task_id,
                payload,
            }],
        }
    }

    fn finalize_requestor(&mut self, ctx: &CallContext, task_id: TaskId) -> Execution {
        let Some(task) = self.tasks.get(&task_id) else {
            return Execution::refund(Refusal::NotRequestor, ctx);
        };
        let refusal = if task.requestor != ctx.sender {
            Some(Refusal::NotRequestor)
        } else if !task.claimed {
            Some(Refusal::NotClaimed)
        } else if !task.completed {
            Some(Refusal::NotCompleted)
        } else {
            None
        };
        if let Some(r) = refusal {
            return Execution::refund(r, ctx);
        }
        let task = self.tasks.remove(&task_id).expect("checked above");
        let mut payouts = vec![
            (ctx.sender, task.requestor_deposit),
            (task.execution_node, task.payment),
        ];
        if !ctx.value.is_zero() {
            payouts.push((ctx.sender, ctx.value));
        }
        Execution {
            outcome: CallOutcome::Accepted,
            payouts,
            events: Vec::new(),
        }
    }

    fn timeout(&mut self, ctx: &CallContext, task_id: TaskId) -> Execution {
        let Some(task) = self.tasks.get_mut(&task_id) else {
            return Execution::refund(Refusal::NotRequestor, ctx);
        };
        let refusal = if task.requestor != ctx.sender {
            Some(Refusal::NotRequestor)
        } else if task.completed {
            Some(Refusal::AlreadyCompleted)
        } else if task.timed_out {
            Some(Refusal::TaskDead)
        } else if ctx.now <= task.deadline() {
            Some(Refusal::NotExpired)
        } else {
            None
        };
        if let Some(r) = refusal {
            return Execution::refund(r, ctx);
        }
        task.timed_out = true;
        let mut payouts = vec![(task.requestor, task.payment)];
        if !ctx.value.is_zero() {
            payouts.push((ctx.sender, ctx.value));
        }
        let mut locked = task.requestor_deposit;
        if task.claimed {
            locked = locked
                .checked_add(task.execution_node_deposit)
                .expect("escrow overflow");
        }
        let payload = BTreeMap::from([
            ("refunded".to_string(), task.payment.to_string()),
            ("locked".to_string(), locked.to_string()),
        ]);
        Execution {
            outcome: CallOutcome::Accepted,
            payouts,
            events: vec![EmittedEvent {
                kind: EventKind::TaskTimedOut,
                task_id,
                payload,
            }],
        }
    }
}

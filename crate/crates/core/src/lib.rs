//! Deterministic simulator for hash-locked escrow payments of outsourced
//! computation executed inside trusted enclaves.

pub mod actors;
pub mod contract;
pub mod crypto;
pub mod enclave;
pub mod harness;
pub mod ledger;
pub mod money;

pub use contract::{
    CallOutcome, ContractCall, EventKind, Refusal, SpocContract, Task, TaskId, TaskState,
};
pub use crypto::{Digest, Secret};
pub use harness::{run_scenario, HarnessError, ScenarioConfig, ScenarioOutcome, ScenarioRun};
pub use ledger::{
    AccountId, GasSchedule, Ledger, LedgerConfig, LedgerError, LedgerEvent, Receipt, Tier,
};
pub use money::Money;

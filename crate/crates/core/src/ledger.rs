//! Single-chain ledger: balances, a block clock, gas charging and the event log.
//!
//! Every transaction is mined in its own block. Gas is burned.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::contract::{CallContext, CallOutcome, ContractCall, EventKind, SpocContract, TaskId};
use crate::crypto::sha256;
use crate::money::Money;

/// 20-byte account address, shown as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub [u8; 20]);

impl AccountId {
    pub const NULL: AccountId = AccountId([0u8; 20]);
    pub const CONTRACT: AccountId = AccountId([0x5c; 20]);

    fn derived(index: u64) -> AccountId {
        let d = sha256(&[b"spoc-account".as_slice(), &index.to_be_bytes()].concat());
        let mut id = [0u8; 20];
        id.copy_from_slice(&d.0[..20]);
        AccountId(id)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccountId({})", hex::encode(&self.0[..4]))
    }
}

impl FromStr for AccountId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = hex::decode(s).map_err(|e| e.to_string())?;
        let bytes: [u8; 20] = raw
            .try_into()
            .map_err(|_| "account id must be 20 bytes".to_string())?;
        Ok(AccountId(bytes))
    }
}

impl Serialize for AccountId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AccountId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Transaction priority class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Slow,
    Standard,
    Fast,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Slow, Tier::Standard, Tier::Fast];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Slow => "slow",
            Tier::Standard => "standard",
            Tier::Fast => "fast",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slow" => Ok(Tier::Slow),
            "standard" => Ok(Tier::Standard),
            "fast" => Ok(Tier::Fast),
            other => Err(format!("unknown tier {other:?} (slow|standard|fast)")),
        }
    }
}

/// Measured gas units per contract function, from a test-network deployment.
pub const DEPLOY_GAS: u64 = 1_260_850;
pub const SUBMIT_TASK_GAS: u64 = 277_880;
pub const CLAIM_TASK_GAS: u64 = 145_120;
pub const FINALIZE_EXECUTION_NODE_GAS: u64 = 52_802;
pub const FINALIZE_REQUESTOR_GAS: u64 = 106_357;
/// No measurement exists for `timeout`; it is a single-transfer call like
/// `finalizeExecutionNode`, so it gets the same estimate.
pub const TIMEOUT_GAS: u64 = 52_802;

/// Observed per-task ether cost at each tier, used to back out gas prices.
pub const REFERENCE_TASK_COST: [(Tier, Money); 3] = [
    (Tier::Slow, Money(60_000_000_000_000)),
    (Tier::Standard, Money(6_400_000_000_000_000)),
    (Tier::Fast, Money(16_880_000_000_000_000)),
];
pub const REFERENCE_TASK_GAS: u64 = 582_159;
/// Exchange rate implied by the reference dollar figures.
pub const REFERENCE_USD_PER_ETHER: f64 = 456.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GasSchedule {
    #[serde(default = "default_per_function")]
    pub per_function: BTreeMap<String, u64>,
    #[serde(default = "default_gas_price")]
    pub gas_price: BTreeMap<Tier, Money>,
    /// Seconds until a transaction at this tier is confirmed.
    #[serde(default = "default_confirmation_delay")]
    pub confirmation_delay: BTreeMap<Tier, u64>,
    #[serde(default = "default_usd_per_ether")]
    pub usd_per_ether: f64,
}

fn default_per_function() -> BTreeMap<String, u64> {
    BTreeMap::from([
        ("deploy".to_string(), DEPLOY_GAS),
        ("submitTask".to_string(), SUBMIT_TASK_GAS),
        ("claimTask".to_string(), CLAIM_TASK_GAS),
        (
            "finalizeExecutionNode".to_string(),
            FINALIZE_EXECUTION_NODE_GAS,
        ),
        ("finalizeRequestor".to_string(), FINALIZE_REQUESTOR_GAS),
        ("timeout".to_string(), TIMEOUT_GAS),
    ])
}

fn default_gas_price() -> BTreeMap<Tier, Money> {
    REFERENCE_TASK_COST
        .iter()
        .map(|(tier, cost)| (*tier, Money(cost.0 / REFERENCE_TASK_GAS as u128)))
        .collect()
}

fn default_confirmation_delay() -> BTreeMap<Tier, u64> {
    BTreeMap::from([(Tier::Slow, 600), (Tier::Standard, 300), (Tier::Fast, 120)])
}

fn default_usd_per_ether() -> f64 {
    REFERENCE_USD_PER_ETHER
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            per_function: default_per_function(),
            gas_price: default_gas_price(),
            confirmation_delay: default_confirmation_delay(),
            usd_per_ether: default_usd_per_ether(),
        }
    }
}

impl GasSchedule {
    pub fn gas_for(&self, function: &str) -> Result<u64, LedgerError> {
        self.per_function
            .get(function)
            .copied()
            .ok_or_else(|| LedgerError::UnknownFunction(function.to_string()))
    }

    pub fn price(&self, tier: Tier) -> Result<Money, LedgerError> {
        self.gas_price
            .get(&tier)
            .copied()
            .ok_or(LedgerError::UnknownTier(tier))
    }

    pub fn delay(&self, tier: Tier) -> Result<u64, LedgerError> {
        self.confirmation_delay
            .get(&tier)
            .copied()
            .ok_or(LedgerError::UnknownTier(tier))
    }

    pub fn cost(&self, gas: u64, tier: Tier) -> Result<Money, LedgerError> {
        self.price(tier)?
            .checked_mul(gas as u128)
            .ok_or(LedgerError::Overflow)
    }

    /// Gas units and prices must be positive. Delays may be zero.
    pub fn validate(&self) -> Result<(), String> {
        if let Some((name, _)) = self.per_function.iter().find(|(_, g)| **g == 0) {
            return Err(format!("gas for {name} must be positive"));
        }
        for tier in Tier::ALL {
            match self.gas_price.get(&tier) {
                Some(p) if !p.is_zero() => {}
                Some(_) => return Err(format!("gas price for tier {tier} must be positive")),
                None => return Err(format!("missing gas price for tier {tier}")),
            }
            if !self.confirmation_delay.contains_key(&tier) {
                return Err(format!("missing confirmation delay for tier {tier}"));
            }
        }
        if !(self.usd_per_ether.is_finite() && self.usd_per_ether > 0.0) {
            return Err("usdPerEther must be positive".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockClock {
    pub now: u64,
    pub block_height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEvent {
    pub kind: EventKind,
    pub task_id: TaskId,
    pub block_height: u64,
    pub payload: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub kind: Option<EventKind>,
    pub task_id: Option<TaskId>,
}

impl EventFilter {
    pub fn task(task_id: TaskId) -> Self {
        EventFilter {
            kind: None,
            task_id: Some(task_id),
        }
    }

    pub fn kind(kind: EventKind) -> Self {
        EventFilter {
            kind: Some(kind),
            task_id: None,
        }
    }

    fn matches(&self, e: &LedgerEvent) -> bool {
        self.kind.is_none_or(|k| k == e.kind) && self.task_id.is_none_or(|t| t == e.task_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Receipt {
    pub block_height: u64,
    pub timestamp: u64,
    pub sender: AccountId,
    pub function: String,
    pub value: Money,
    pub tier: Tier,
    pub gas_used: u64,
    pub gas_cost: Money,
    pub outcome: CallOutcome,
    pub refunded: Money,
    pub events: Vec<LedgerEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("insufficient balance: need {needed}, have {available}")]
    InsufficientBalance { needed: Money, available: Money },
    #[error("unknown contract function {0:?}")]
    UnknownFunction(String),
    #[error("no price or delay configured for tier {0}")]
    UnknownTier(Tier),
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("account {0} cannot send transactions")]
    InvalidSender(AccountId),
    #[error("amount overflow")]
    Overflow,
    #[error("contract cannot cover payouts of {0}")]
    ContractInsolvent(Money),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LedgerConfig {
    #[serde(default)]
    pub gas: GasSchedule,
    /// Off by default: payoff accounting excludes gas.
    #[serde(default)]
    pub gas_charging: bool,
    #[serde(default = "default_threshold")]
    pub threshold: Money,
}

fn default_threshold() -> Money {
    Money(500_000_000_000_000_000)
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            gas: GasSchedule::default(),
            gas_charging: false,
            threshold: default_threshold(),
        }
    }
}

/// Balance-sheet view used by the conservation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Supply {
    pub minted: Money,
    pub accounts: Money,
    pub contract: Money,
    pub burned: Money,
}

impl Supply {
    pub fn is_conserved(&self) -> bool {
        self.accounts
            .checked_add(self.contract)
            .and_then(|m| m.checked_add(self.burned))
            == Some(self.minted)
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    schedule: GasSchedule,
    gas_charging: bool,
    clock: BlockClock,
    balances: BTreeMap<AccountId, Money>,
    next_account: u64,
    minted: Money,
    burned: Money,
    gas_paid: BTreeMap<AccountId, Money>,
    events: Vec<LedgerEvent>,
    contract: SpocContract,
}

impl Ledger {
    pub fn new(config: &LedgerConfig) -> Self {
        Ledger {
            schedule: config.gas.clone(),
            gas_charging: config.gas_charging,
            clock: BlockClock::default(),
            balances: BTreeMap::from([(AccountId::CONTRACT, Money::ZERO)]),
            next_account: 1,
            minted: Money::ZERO,
            burned: Money::ZERO,
            gas_paid: BTreeMap::new(),
            events: Vec::new(),
            contract: SpocContract::new(config.threshold),
        }
    }

    pub fn create_account(&mut self, initial_balance: Money) -> AccountId {
        let id = loop {
            let id = AccountId::derived(self.next_account);
            self.next_account += 1;
            if id != AccountId::NULL && id != AccountId::CONTRACT {
                break id;
            }
        };
        self.minted = self
            .minted
            .checked_add(initial_balance)
            .expect("total supply overflow");
        self.balances.insert(id, initial_balance);
        id
    }

    pub fn balance(&self, account: AccountId) -> Money {
        self.balances.get(&account).copied().unwrap_or_default()
    }

    pub fn contract_balance(&self) -> Money {
        self.balance(AccountId::CONTRACT)
    }

    pub fn contract(&self) -> &SpocContract {
        &self.contract
    }

    pub fn clock(&self) -> BlockClock {
        self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock.now
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn gas_charging(&self) -> bool {
        self.gas_charging
    }

    pub fn gas_paid_by(&self, account: AccountId) -> Money {
        self.gas_paid.get(&account).copied().unwrap_or_default()
    }

    pub fn supply(&self) -> Supply {
        let accounts = self
            .balances
            .iter()
            .filter(|(id, _)| **id != AccountId::CONTRACT)
            .map(|(_, m)| *m)
            .sum();
        Supply {
            minted: self.minted,
            accounts,
            contract: self.contract_balance(),
            burned: self.burned,
        }
    }

    /// Lets wall-clock time pass without mining a block.
    pub fn advance_time(&mut self, seconds: u64) {
        self.clock.now = self.clock.now.saturating_add(seconds);
    }

    pub fn submit_transaction(
        &mut self,
        sender: AccountId,
        call: &ContractCall,
        value: Money,
        tier: Tier,
    ) -> Result<Receipt, LedgerError> {
        if sender == AccountId::NULL || sender == AccountId::CONTRACT {
            return Err(LedgerError::InvalidSender(sender));
        }
        let available = *self
            .balances
            .get(&sender)
            .ok_or(LedgerError::UnknownAccount(sender))?;
        let function = call.function_name();
        let gas_used = self.schedule.gas_for(function)?;
        let delay = self.schedule.delay(tier)?;
        let gas_cost = if self.gas_charging {
            self.schedule.cost(gas_used, tier)?
        } else {
            Money::ZERO
        };
        let needed = value.checked_add(gas_cost).ok_or(LedgerError::Overflow)?;
        if available < needed {
            return Err(LedgerError::InsufficientBalance { needed, available });
        }

        let next_clock = BlockClock {
            now: self.clock.now.saturating_add(delay),
            block_height: self.clock.block_height + 1,
        };
        let ctx = CallContext {
            sender,
            value,
            now: next_clock.now,
        };
        let mut contract = self.contract.clone();
        let execution = contract.apply(&ctx, call);
        let payout_total: Money = execution.payouts.iter().map(|(_, m)| *m).sum();
        let contract_funds = self
            .contract_balance()
            .checked_add(value)
            .ok_or(LedgerError::Overflow)?;
        if payout_total > contract_funds {
            return Err(LedgerError::ContractInsolvent(payout_total));
        }

        // Commit: nothing below can fail.
        self.clock = next_clock;
        self.contract = contract;
        self.debit(sender, needed);
        self.burned = self.burned.checked_add(gas_cost).expect("burn overflow");
        if !gas_cost.is_zero() {
            let paid = self.gas_paid.entry(sender).or_default();
            *paid = paid.checked_add(gas_cost).expect("gas overflow");
        }
        self.credit(AccountId::CONTRACT, value);
        for (to, amount) in &execution.payouts {
            self.debit(AccountId::CONTRACT, *amount);
            self.credit(*to, *amount);
        }
        let events: Vec<LedgerEvent> = execution
            .events
            .iter()
            .map(|e| LedgerEvent {
                kind: e.kind,
                task_id: e.task_id,
                block_height: next_clock.block_height,
                payload: e.payload.clone(),
            })
            .collect();
        self.events.extend(events.iter().cloned());

        Ok(Receipt {
            block_height: next_clock.block_height,
            timestamp: next_clock.now,
            sender,
            function: function.to_string(),
            value,
            tier,
            gas_used,
            gas_cost,
            outcome: execution.outcome,
            refunded: execution.refunded(sender),
            events,
        })
    }

    fn debit(&mut self, account: AccountId, amount: Money) {
        let bal = self.balances.entry(account).or_default();
        *bal = bal
            .checked_sub(amount)
            .expect("debit checked before commit");
    }

    fn credit(&mut self, account: AccountId, amount: Money) {
        let bal = self.balances.entry(account).or_default();
        *bal = bal.checked_add(amount).expect("credit overflow");
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn query_events(&self, filter: EventFilter) -> Vec<LedgerEvent> {
        self.events
            .iter()
            .filter(|e| filter.matches(e))
            .cloned()
            .collect()
    }

    /// One JSON object per line: kind, taskId, blockHeight, payload.
    pub fn export_events_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Contract storage as JSON, tasks keyed by id.
    pub fn contract_state_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.contract).expect("contract state serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::Refusal;
    use crate::crypto::generate_secret;

    fn submit_call(secret_seed: u64) -> ContractCall {
        ContractCall::SubmitTask {
            function_name: "f".into(),
            hash_lock: generate_secret(secret_seed).digest(),
            expires: 3600,
        }
    }

    #[test]
    fn accounts_are_distinct_and_funded() {
        let mut l = Ledger::new(&LedgerConfig::default());
        let a = l.create_account(Money::ZERO);
        let b = l.create_account(Money::ether(1));
        assert_ne!(a, b);
        assert_eq!(l.balance(a), Money::ZERO);
        assert_eq!(l.balance(b), Money(1_000_000_000_000_000_000));
        assert_eq!(l.supply().minted, Money::ether(1));
    }

    #[test]
    fn default_schedule_matches_measurements() {
        let g = GasSchedule::default();
        assert_eq!(g.gas_for("submitTask").unwrap(), 277_880);
        assert_eq!(g.gas_for("deploy").unwrap(), 1_260_850);
        assert_eq!(g.delay(Tier::Slow).unwrap(), 600);
        assert_eq!(g.delay(Tier::Standard).unwrap(), 300);
        assert_eq!(g.delay(Tier::Fast).unwrap(), 120);
        // 0.00006 ether / 582159 gas, floored.
        assert_eq!(g.price(Tier::Slow).unwrap(), Money(103_064_626));
        assert!(g.validate().is_ok());
        assert!(matches!(
            g.gas_for("selfdestruct"),
            Err(LedgerError::UnknownFunction(_))
        ));
    }

    #[test]
    fn gas_is_charged_and_burned() {
        let cfg = LedgerConfig {
            gas_charging: true,
            threshold: Money(5),
            ..LedgerConfig::default()
        };
        let mut l = Ledger::new(&cfg);
        let r = l.create_account(Money::ether(1));
        let receipt = l
            .submit_transaction(r, &submit_call(1), Money(15), Tier::Slow)
            .unwrap();
        assert_eq!(receipt.gas_used, 277_880);
        assert_eq!(receipt.gas_cost, Money(277_880 * 103_064_626));
        assert_eq!(receipt.timestamp, 600);
        assert_eq!(receipt.block_height, 1);
        assert_eq!(l.supply().burned, receipt.gas_cost);
        assert!(l.supply().is_conserved());
        assert_eq!(l.contract_balance(), Money(15));
    }

    #[test]
    fn insufficient_balance_changes_nothing() {
        let mut l = Ledger::new(&LedgerConfig {
            threshold: Money(5),
            ..LedgerConfig::default()
        });
        let r = l.create_account(Money(10));
        let before = (l.clock(), l.supply(), l.balance(r));
        let err = l
            .submit_transaction(r, &submit_call(1), Money(15), Tier::Fast)
            .unwrap_err();
        assert!(matches!(err, LedgerError::InsufficientBalance { .. }));
        assert_eq!(before, (l.clock(), l.supply(), l.balance(r)));
        assert!(l.events().is_empty());
    }

    #[test]
    fn refused_call_charges_gas_and_refunds_value() {
        let cfg = LedgerConfig {
            gas_charging: true,
            threshold: Money(5),
            ..LedgerConfig::default()
        };
        let mut l = Ledger::new(&cfg);
        let r = l.create_account(Money::ether(1));
        let n1 = l.create_account(Money::ether(1));
        let n2 = l.create_account(Money::ether(1));
        l.submit_transaction(r, &submit_call(1), Money(15), Tier::Fast)
            .unwrap();
        let claim = ContractCall::ClaimTask { task_id: TaskId(0) };
        l.submit_transaction(n1, &claim, Money(5), Tier::Fast)
            .unwrap();
        let contract_before = l.contract().clone();
        let bal_before = l.balance(n2);
        let receipt = l
            .submit_transaction(n2, &claim, Money(9), Tier::Fast)
            .unwrap();
        assert_eq!(receipt.outcome.refusal(), Some(Refusal::AlreadyClaimed));
        assert_eq!(receipt.refunded, Money(9));
        assert_eq!(l.contract(), &contract_before);
        assert_eq!(
            l.balance(n2),
            bal_before.checked_sub(receipt.gas_cost).unwrap()
        );
        assert!(receipt.events.is_empty());
        assert!(l.supply().is_conserved());
    }

    #[test]
    fn null_and_unknown_senders_rejected() {
        let mut l = Ledger::new(&LedgerConfig::default());
        assert_eq!(
            l.submit_transaction(AccountId::NULL, &submit_call(1), Money::ZERO, Tier::Fast),
            Err(LedgerError::InvalidSender(AccountId::NULL))
        );
        let ghost = AccountId([7; 20]);
        assert_eq!(
            l.submit_transaction(ghost, &submit_call(1), Money::ZERO, Tier::Fast),
            Err(LedgerError::UnknownAccount(ghost))
        );
    }

    #[test]
    fn missing_function_gas_is_unknown_function() {
        let mut cfg = LedgerConfig::default();
        cfg.gas.per_function.remove("timeout");
        let mut l = Ledger::new(&cfg);
        let r = l.create_account(Money::ether(1));
        let err = l
            .submit_transaction(
                r,
                &ContractCall::Timeout { task_id: TaskId(0) },
                Money::ZERO,
                Tier::Fast,
            )
            .unwrap_err();
        assert_eq!(err, LedgerError::UnknownFunction("timeout".into()));
    }

    #[test]
    fn event_queries_and_jsonl() {
        let mut l = Ledger::new(&LedgerConfig {
            threshold: Money(5),
            ..LedgerConfig::default()
        });
        assert!(l.query_events(EventFilter::default()).is_empty());
        let r = l.create_account(Money(100));
        l.submit_transaction(r, &submit_call(1), Money(15), Tier::Fast)
            .unwrap();
        assert_eq!(l.query_events(EventFilter::task(TaskId(0))).len(), 1);
        assert!(l.query_events(EventFilter::task(TaskId(5))).is_empty());
        assert!(l
            .query_events(EventFilter::kind(EventKind::TaskClaimed))
            .is_empty());

        let mut buf = Vec::new();
        l.export_events_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["blockHeight", "kind", "payload", "taskId"]);
        assert_eq!(v["kind"], "TaskSubmitted");
        assert_eq!(v["taskId"], 0);
    }
}

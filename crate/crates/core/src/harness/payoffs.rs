//! Payoff matrix over all strategy pairs and the honest-dominance check.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{run_scenario, HarnessError, InvariantReport, ScenarioConfig, ScenarioOutcome};
use crate::actors::{NodeStrategy, RequestorStrategy};
use crate::money::{signed_string, Money};

/// V, P, C, D_R and D_E for one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PayoffParams {
    pub value: Money,
    pub payment: Money,
    pub cost: Money,
    pub requestor_deposit: Money,
    pub node_deposit: Money,
}

impl PayoffParams {
    /// V > P > C > 0, D_R > 0 and D_E >= D_R (the contract rejects smaller node deposits).
    pub fn is_rational(&self) -> bool {
        self.value > self.payment
            && self.payment > self.cost
            && !self.cost.is_zero()
            && !self.requestor_deposit.is_zero()
            && self.node_deposit >= self.requestor_deposit
    }

    pub fn config(
        &self,
        requestor: RequestorStrategy,
        node: NodeStrategy,
        seed: u64,
    ) -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            requestor,
            node,
            value_of_result: self.value,
            payment: self.payment,
            cost: Some(self.cost),
            node_deposit: Some(self.node_deposit),
            seed,
            ..ScenarioConfig::default()
        };
        cfg.ledger.threshold = self.requestor_deposit;
        let stake = self
            .payment
            .checked_add(self.requestor_deposit)
            .and_then(|m| m.checked_add(self.node_deposit))
            .and_then(|m| m.checked_add(cfg.initial_balance));
        if let Some(b) = stake {
            cfg.initial_balance = b;
        }
        cfg
    }
}

impl Default for PayoffParams {
    fn default() -> Self {
        PayoffParams {
            value: Money::ether(100),
            payment: Money::ether(10),
            cost: Money::ether(3),
            requestor_deposit: Money::ether(5),
            node_deposit: Money::ether(5),
        }
    }
}

/// The four named behaviour pairs with closed-form payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedScenario {
    BothHonest,
    NodeDoesNotExecute,
    NodeDoesNotSendResult,
    RequestorDoesNotConfirm,
}

impl NamedScenario {
    pub const ALL: [NamedScenario; 4] = [
        NamedScenario::BothHonest,
        NamedScenario::NodeDoesNotExecute,
        NamedScenario::NodeDoesNotSendResult,
        NamedScenario::RequestorDoesNotConfirm,
    ];

    pub fn strategies(self) -> (RequestorStrategy, NodeStrategy) {
        match self {
            NamedScenario::BothHonest => (RequestorStrategy::Honest, NodeStrategy::Honest),
            NamedScenario::NodeDoesNotExecute => {
                (RequestorStrategy::Honest, NodeStrategy::ClaimOnly)
            }
            NamedScenario::NodeDoesNotSendResult => {
                (RequestorStrategy::Honest, NodeStrategy::ComputeNoDeliver)
            }
            NamedScenario::RequestorDoesNotConfirm => {
                (RequestorStrategy::NoConfirm, NodeStrategy::Honest)
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NamedScenario::BothHonest => "Both honest",
            NamedScenario::NodeDoesNotExecute => "EN does not execute",
            NamedScenario::NodeDoesNotSendResult => "EN does not send result",
            NamedScenario::RequestorDoesNotConfirm => "R does not confirm",
        }
    }
}

/// Closed-form (requestor, node) payoffs for a named scenario.
pub fn closed_form(scenario: NamedScenario, p: &PayoffParams) -> (i128, i128) {
    let (v, price, c, dr, de) = (
        p.value.signed(),
        p.payment.signed(),
        p.cost.signed(),
        p.requestor_deposit.signed(),
        p.node_deposit.signed(),
    );
    match scenario {
        NamedScenario::BothHonest => (v - price, price - c),
        NamedScenario::NodeDoesNotExecute => (-dr, -de),
        NamedScenario::NodeDoesNotSendResult => (-(price + dr), -c),
        NamedScenario::RequestorDoesNotConfirm => (v - price - dr, -c),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatrixCell {
    pub requestor: RequestorStrategy,
    pub node: NodeStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<NamedScenario>,
    pub outcome: ScenarioOutcome,
    pub invariants: InvariantReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PayoffMatrix {
    pub params: PayoffParams,
    pub rational: bool,
    pub cells: Vec<MatrixCell>,
}

impl PayoffMatrix {
    pub fn cell(&self, requestor: RequestorStrategy, node: NodeStrategy) -> Option<&MatrixCell> {
        self.cells
            .iter()
            .find(|c| c.requestor == requestor && c.node == node)
    }

    /// Named scenarios whose simulated payoffs differ from the closed form.
    pub fn closed_form_mismatches(&self) -> Vec<NamedScenario> {
        NamedScenario::ALL
            .into_iter()
            .filter(|s| {
                let (r, n) = s.strategies();
                match self.cell(r, n) {
                    Some(c) => {
                        (c.outcome.requestor_payoff, c.outcome.node_payoff)
                            != closed_form(*s, &self.params)
                    }
                    None => true,
                }
            })
            .collect()
    }
}

impl fmt::Display for PayoffMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "V={} P={} C={} D_R={} D_E={} rational={}",
            p.value, p.payment, p.cost, p.requestor_deposit, p.node_deposit, self.rational
        )?;
        writeln!(
            f,
            "{:<15} {:<19} {:>26} {:>26} {:>26}  scenario",
            "requestor", "node", "requestor payoff", "node payoff", "locked"
        )?;
        for c in &self.cells {
            writeln!(
                f,
                "{:<15} {:<19} {:>26} {:>26} {:>26}  {}",
                c.requestor.as_str(),
                c.node.as_str(),
                c.outcome.requestor_payoff,
                c.outcome.node_payoff,
                c.outcome.locked_in_contract.0,
                c.scenario.map(NamedScenario::label).unwrap_or("-")
            )?;
        }
        Ok(())
    }
}

/// Runs every requestor strategy against every node strategy.
pub fn payoff_matrix(params: &PayoffParams, seed: u64) -> Result<PayoffMatrix, HarnessError> {
    let mut cells = Vec::with_capacity(9);
    for requestor in RequestorStrategy::ALL {
        for node in NodeStrategy::ALL {
            let run = run_scenario(&params.config(requestor, node, seed))?;
            let scenario = NamedScenario::ALL
                .into_iter()
                .find(|s| s.strategies() == (requestor, node));
            cells.push(MatrixCell {
                requestor,
                node,
                scenario,
                outcome: run.outcome,
                invariants: run.invariants,
            });
        }
    }
    Ok(PayoffMatrix {
        params: *params,
        rational: params.is_rational(),
        cells,
    })
}

/// Explicit parameter points plus optional seeded random draws.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParamGrid {
    #[serde(default)]
    pub points: Vec<PayoffParams>,
    #[serde(default)]
    pub random: Option<RandomGrid>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RandomGrid {
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    /// Upper bound for V, in wei.
    #[serde(default = "default_max")]
    pub max: Money,
}

fn default_max() -> Money {
    Money::ether(1_000_000)
}

impl ParamGrid {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn random(draws: usize, seed: u64) -> Self {
        ParamGrid {
            points: Vec::new(),
            random: Some(RandomGrid {
                draws,
                seed,
                max: default_max(),
            }),
        }
    }

    /// Explicit points followed by the random draws.
    pub fn expand(&self) -> Vec<PayoffParams> {
        let mut out = self.points.clone();
        if let Some(r) = &self.random {
            let mut rng = ChaCha20Rng::seed_from_u64(r.seed);
            let max = r.max.0.max(3);
            for _ in 0..r.draws {
                out.push(random_params(&mut rng, max));
            }
        }
        out
    }
}

/// One draw with V > P > C > 0 and D_E >= D_R > 0.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, max: u128) -> PayoffParams {
    let value = rng.gen_range(3..=max);
    let payment = rng.gen_range(2..value);
    let cost = rng.gen_range(1..payment);
    let requestor_deposit = rng.gen_range(1..=max);
    let node_deposit = rng.gen_range(requestor_deposit..=max);
    PayoffParams {
        value: Money(value),
        payment: Money(payment),
        cost: Money(cost),
        requestor_deposit: Money(requestor_deposit),
        node_deposit: Money(node_deposit),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DominanceFailure {
    pub draw: usize,
    pub params: PayoffParams,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DominanceReport {
    pub draws: usize,
    pub skipped_irrational: usize,
    pub closed_form_mismatches: usize,
    pub invariant_failures: usize,
    pub failures: Vec<DominanceFailure>,
    /// Draws where withholding confirmation still leaves the requestor ahead in absolute terms.
    pub no_confirm_positive: usize,
    #[serde(with = "signed_string")]
    pub max_no_confirm_payoff: i128,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty() && self.closed_form_mismatches == 0 && self.invariant_failures == 0
    }
}

impl fmt::Display for DominanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "draws                    {}", self.draws)?;
        writeln!(f, "skipped (not rational)   {}", self.skipped_irrational)?;
        writeln!(
            f,
            "closed-form mismatches   {}",
            self.closed_form_mismatches
        )?;
        writeln!(f, "invariant failures       {}", self.invariant_failures)?;
        writeln!(f, "dominance failures       {}", self.failures.len())?;
        writeln!(f, "no-confirm payoff > 0    {}", self.no_confirm_positive)?;
        write!(
            f,
            "honest dominates         {}",
            if self.holds() { "yes" } else { "no" }
        )
    }
}

/// Checks, per draw, that honesty strictly beats every same-party deviation
/// against an honest counterparty and that every other cheating payoff is negative.
pub fn dominance_check(grid: &ParamGrid, seed: u64) -> Result<DominanceReport, HarnessError> {
    let mut report = DominanceReport {
        max_no_confirm_payoff: i128::MIN,
        ..DominanceReport::default()
    };
    for (draw, params) in grid.expand().into_iter().enumerate() {
        report.draws += 1;
        if !params.is_rational() {
            report.skipped_irrational += 1;
            continue;
        }
        let m = payoff_matrix(&params, seed)?;
        if !m.closed_form_mismatches().is_empty() {
            report.closed_form_mismatches += 1;
        }
        if m.cells.iter().any(|c| !c.invariants.all_hold()) {
            report.invariant_failures += 1;
        }
        let mut fail = |reason: String| {
            report.failures.push(DominanceFailure {
                draw,
                params,
                reason,
            });
        };
        let honest = &m
            .cell(RequestorStrategy::Honest, NodeStrategy::Honest)
            .expect("full matrix")
            .outcome;
        if honest.requestor_payoff <= 0 || honest.node_payoff <= 0 {
            fail("honest pair does not gain".into());
        }
        for r in RequestorStrategy::ALL
            .into_iter()
            .filter(|r| *r != RequestorStrategy::Honest)
        {
            let o = &m
                .cell(r, NodeStrategy::Honest)
                .expect("full matrix")
                .outcome;
            if o.requestor_payoff >= honest.requestor_payoff {
                fail(format!("requestor {} is not worse than honest", r.as_str()));
            }
            if r != RequestorStrategy::NoConfirm && o.requestor_payoff >= 0 {
                fail(format!("requestor {} does not lose funds", r.as_str()));
            }
        }
        for n in NodeStrategy::ALL
            .into_iter()
            .filter(|n| *n != NodeStrategy::Honest)
        {
            let o = &m
                .cell(RequestorStrategy::Honest, n)
                .expect("full matrix")
                .outcome;
            if o.node_payoff >= honest.node_payoff {
                fail(format!("node {} is not worse than honest", n.as_str()));
            }
            if o.node_payoff >= 0 {
                fail(format!("node {} does not lose funds", n.as_str()));
            }
        }
        let nc = m
            .cell(RequestorStrategy::NoConfirm, NodeStrategy::Honest)
            .expect("full matrix")
            .outcome
            .requestor_payoff;
        if nc > 0 {
            report.no_confirm_positive += 1;
        }
        report.max_no_confirm_payoff = report.max_no_confirm_payoff.max(nc);
    }
    if report.max_no_confirm_payoff == i128::MIN {
        report.max_no_confirm_payoff = 0;
    }
    Ok(report)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use spoc_sim::actors::{NodeStrategy, RequestorStrategy};
use spoc_sim::contract::{CallContext, CallOutcome, ContractCall, Refusal, SpocContract, TaskId};
use spoc_sim::crypto::{hash_secret, Secret};
use spoc_sim::enclave::{Label, Principal};
use spoc_sim::harness::{
    gas_report, latency_report, run_scenario, Destination, ScenarioConfig, ScenarioRun, TraceRecord,
};
use spoc_sim::{AccountId, GasSchedule, Ledger, LedgerConfig, Money, Tier};

const DRAWS: usize = 1000;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    v: u128,
    p: u128,
    c: u128,
    dr: u128,
    de: u128,
}

/// V > P > C > 0 and D_E >= D_R > 0, in wei.
fn draws() -> Vec<Draw> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let max: u128 = 1_000_000 * 1_000_000_000_000_000_000;
    (0..DRAWS)
        .map(|_| {
            let v = rng.gen_range(3..=max);
            let p = rng.gen_range(2..v);
            let c = rng.gen_range(1..p);
            let dr = rng.gen_range(1..=max);
            let de = rng.gen_range(dr..=max);
            Draw { v, p, c, dr, de }
        })
        .collect()
}

fn config(d: &Draw, requestor: RequestorStrategy, node: NodeStrategy, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        requestor,
        node,
        value_of_result: Money(d.v),
        payment: Money(d.p),
        cost: Some(Money(d.c)),
        node_deposit: Some(Money(d.de)),
        initial_balance: Money(d.p + d.dr + d.de),
        seed,
        ..ScenarioConfig::default()
    };
    cfg.ledger.threshold = Money(d.dr);
    cfg
}

/// The four named pairs, plus input withholding for the dominance check.
const PAIRS: [(RequestorStrategy, NodeStrategy); 5] = [
    (RequestorStrategy::Honest, NodeStrategy::Honest),
    (RequestorStrategy::Honest, NodeStrategy::ClaimOnly),
    (RequestorStrategy::Honest, NodeStrategy::ComputeNoDeliver),
    (RequestorStrategy::NoConfirm, NodeStrategy::Honest),
    (RequestorStrategy::WithholdInput, NodeStrategy::Honest),
];

/// Closed forms, written out independently of the library.
fn expected(d: &Draw, pair: (RequestorStrategy, NodeStrategy)) -> Option<(i128, i128)> {
    let (v, p, c, dr, de) = (
        d.v as i128,
        d.p as i128,
        d.c as i128,
        d.dr as i128,
        d.de as i128,
    );
    match pair {
        (RequestorStrategy::Honest, NodeStrategy::Honest) => Some((v - p, p - c)),
        (RequestorStrategy::Honest, NodeStrategy::ClaimOnly) => Some((-dr, -de)),
        (RequestorStrategy::Honest, NodeStrategy::ComputeNoDeliver) => Some((-(p + dr), -c)),
        (RequestorStrategy::NoConfirm, NodeStrategy::Honest) => Some((v - p - dr, -c)),
        _ => None,
    }
}

struct DrawRuns {
    draw: Draw,
    runs: Vec<ScenarioRun>,
}

fn criterion_1(all: &[DrawRuns], secs: f64) -> Verdict {
    let mut mismatches = Vec::new();
    for (i, dr) in all.iter().enumerate() {
        for (pair, run) in PAIRS.iter().zip(&dr.runs) {
            if let Some(want) = expected(&dr.draw, *pair) {
                let got = (run.outcome.requestor_payoff, run.outcome.node_payoff);
                if got != want {
                    mismatches.push(format!("draw {i} {pair:?}: got {got:?}, want {want:?}"));
                }
            }
        }
    }
    verdict(
        mismatches.is_empty() && secs < 10.0,
        format!(
            "{} draws x 4 scenarios, {} mismatches{}",
            all.len(),
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!("; first: {m}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_2() -> Verdict {
    let schedule = GasSchedule::default();
    let want = [
        ("deploy", 1_260_850u64),
        ("submitTask", 277_880),
        ("claimTask", 145_120),
        ("finalizeExecutionNode", 52_802),
        ("finalizeRequestor", 106_357),
    ];
    let mut bad = Vec::new();
    for (f, g) in want {
        if schedule.gas_for(f).ok() != Some(g) {
            bad.push(f.to_string());
        }
    }
    let report = gas_report(&schedule, Tier::Slow).expect("default schedule is complete");
    let sum: u64 = want[1..].iter().map(|(_, g)| g).sum();
    if report.deploy.gas != 1_260_850 {
        bad.push("report deploy".into());
    }
    if report.total_per_task_gas != 582_159 || sum != 582_159 {
        bad.push(format!("total {}", report.total_per_task_gas));
    }
    let listed: BTreeMap<&str, u64> = report
        .per_function
        .iter()
        .map(|l| (l.function.as_str(), l.gas))
        .collect();
    for (f, g) in &want[1..] {
        if listed.get(f) != Some(g) {
            bad.push(format!("report {f}"));
        }
    }
    // A measured honest run with gas charging must burn exactly the per-task total.
    let mut cfg = ScenarioConfig::default();
    cfg.ledger.gas_charging = true;
    cfg.tier = Tier::Slow;
    let run = run_scenario(&cfg).expect("default config runs");
    let gas_used: u64 = run
        .trace
        .entries
        .iter()
        .filter_map(|e| match &e.record {
            TraceRecord::Call { gas_used, .. } => Some(*gas_used),
            _ => None,
        })
        .sum();
    if gas_used != 582_159 {
        bad.push(format!("honest run used {gas_used} gas"));
    }
    verdict(
        bad.is_empty(),
        format!(
            "deploy 1260850, per-task total {}, honest run {gas_used} gas{}",
            report.total_per_task_gas,
            if bad.is_empty() {
                String::new()
            } else {
                format!("; wrong: {bad:?}")
            }
        ),
    )
}

fn criterion_3() -> Verdict {
    let base = ScenarioConfig::default();
    let mut got = Vec::new();
    let mut pass = true;
    for (tier, want) in [
        (Tier::Slow, 2400u64),
        (Tier::Standard, 1200),
        (Tier::Fast, 480),
    ] {
        match latency_report(&base, tier) {
            Ok(r) => {
                pass &= r.measured == want;
                got.push(format!("{tier}={}s", r.measured));
            }
            Err(e) => {
                pass = false;
                got.push(format!("{tier}: {e}"));
            }
        }
    }
    verdict(pass, got.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Funding {
    Funded,
    /// Cannot cover the deposit at all.
    Broke,
    /// Attaches less than the threshold.
    Stingy,
}

fn funding(pattern: usize, i: usize, n: usize) -> Funding {
    match pattern {
        0 => Funding::Funded,
        1 if i == 0 => Funding::Broke,
        2 if i + 1 != n && i.is_multiple_of(3) => Funding::Broke,
        2 if i + 1 != n && i % 3 == 1 => Funding::Stingy,
        _ => Funding::Funded,
    }
}

/// Claims arrive in `order`; returns (accepted count, accepted node, first funded in order).
fn race(n: usize, pattern: usize, order: &[usize]) -> (usize, Option<usize>, Option<usize>) {
    let threshold = Money::ether(1);
    let mut ledger = Ledger::new(&LedgerConfig {
        threshold,
        ..LedgerConfig::default()
    });
    let requestor = ledger.create_account(Money::ether(100));
    let nodes: Vec<(AccountId, Funding)> = (0..n)
        .map(|i| {
            let f = funding(pattern, i, n);
            let balance = if f == Funding::Broke {
                Money(threshold.0 / 2)
            } else {
                Money::ether(10)
            };
            (ledger.create_account(balance), f)
        })
        .collect();
    let hash_lock = Secret::from_slice(&[7u8; 32]).unwrap().digest();
    let r = ledger
        .submit_transaction(
            requestor,
            &ContractCall::SubmitTask {
                function_name: "sha256".into(),
                hash_lock,
                expires: 3600,
            },
            Money::ether(3),
            Tier::Fast,
        )
        .expect("submit");
    let CallOutcome::TaskCreated { task_id } = r.outcome else {
        panic!("submit refused: {:?}", r.outcome);
    };
    let mut accepted = Vec::new();
    for &i in order {
        let (acct, f) = nodes[i];
        let value = match f {
            Funding::Stingy => Money(threshold.0 - 1),
            _ => threshold,
        };
        if let Ok(receipt) = ledger.submit_transaction(
            acct,
            &ContractCall::ClaimTask { task_id },
            value,
            Tier::Fast,
        ) {
            if receipt.outcome == CallOutcome::Accepted {
                accepted.push(i);
            }
        }
    }
    let first_funded = order
        .iter()
        .copied()
        .find(|&i| nodes[i].1 == Funding::Funded);
    (accepted.len(), accepted.first().copied(), first_funded)
}

fn criterion_4() -> Verdict {
    let mut cases = 0usize;
    let mut failures = Vec::new();
    let mut check = |n: usize, pattern: usize, order: &[usize]| {
        cases += 1;
        let (count, winner, first) = race(n, pattern, order);
        if count != 1 || winner != first {
            failures.push(format!("n={n} pattern={pattern} order={order:?}: {count} accepted, winner {winner:?}, first funded {first:?}"));
        }
    };
    for n in 2..=6 {
        for pattern in 0..3 {
            for order in (0..n).permutations(n) {
                check(n, pattern, &order);
            }
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for n in 7..=20 {
        for pattern in 0..3 {
            for _ in 0..40 {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                check(n, pattern, &order);
            }
        }
    }
    // The same race through full actors: every node sees the submission and claims.
    let mut harness_bad = 0;
    for n in 2..=20 {
        for seed in 0..3 {
            let cfg = ScenarioConfig {
                nodes: n,
                seed,
                ..ScenarioConfig::default()
            };
            let run = run_scenario(&cfg).expect("runs");
            let claims: Vec<bool> = run
                .trace
                .entries
                .iter()
                .filter_map(|e| match &e.record {
                    TraceRecord::Call {
                        function, outcome, ..
                    } if function == "claimTask" => Some(*outcome == CallOutcome::Accepted),
                    _ => None,
                })
                .collect();
            cases += 1;
            if claims.len() != n || claims.iter().filter(|a| **a).count() != 1 || !claims[0] {
                harness_bad += 1;
            }
        }
    }
    verdict(
        failures.is_empty() && harness_bad == 0,
        format!(
            "{cases} races (exhaustive N<=6, sampled 7..=20), {} ledger failures, {harness_bad} actor failures{}",
            failures.len(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_5() -> Verdict {
    let vectors: [(&[u8], &str); 3] = [
        (
            b"",
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        ),
        (
            b"abc",
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        ),
        (
            b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
            "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
        ),
    ];
    let mut vector_fail = 0;
    for (input, hex) in vectors {
        if spoc_sim::crypto::sha256(input).to_hex() != hex {
            vector_fail += 1;
        }
    }

    let threshold = Money(10);
    let requestor = AccountId([1; 20]);
    let node = AccountId([2; 20]);
    let mut contract = SpocContract::new(threshold);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut wrong = 0;
    let pairs = 10_000u64;
    for now in 1..=pairs {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        let secret = Secret(bytes);
        let mut flipped = bytes;
        let bit = rng.gen_range(0..256);
        flipped[bit / 8] ^= 1 << (bit % 8);
        let lock: [u8; 32] = Sha256::digest(bytes).into();
        let lock = spoc_sim::Digest(lock);
        if hash_secret(&bytes).ok() != Some(lock) {
            wrong += 1;
        }
        let ctx = |sender, value| CallContext { sender, value, now };
        let e = contract.apply(
            &ctx(requestor, Money(15)),
            &ContractCall::SubmitTask {
                function_name: "f".into(),
                hash_lock: lock,
                expires: 1_000_000,
            },
        );
        let CallOutcome::TaskCreated { task_id } = e.outcome else {
            return verdict(false, "submit refused");
        };
        contract.apply(&ctx(node, threshold), &ContractCall::ClaimTask { task_id });
        let bad = contract.apply(
            &ctx(node, Money::ZERO),
            &ContractCall::FinalizeExecutionNode {
                task_id,
                secret: Secret(flipped),
            },
        );
        if bad.outcome
            != (CallOutcome::Refused {
                reason: Refusal::BadSecret,
            })
            || !bad.payouts.is_empty()
        {
            wrong += 1;
        }
        let good = contract.apply(
            &ctx(node, Money::ZERO),
            &ContractCall::FinalizeExecutionNode { task_id, secret },
        );
        if good.outcome != CallOutcome::Accepted || good.payouts != vec![(node, threshold)] {
            wrong += 1;
        }
    }
    verdict(
        wrong == 0 && vector_fail == 0,
        format!(
            "{pairs} pairs, {wrong} wrong verdicts; 3 SHA-256 vectors, {vector_fail} mismatched"
        ),
    )
}

fn criterion_6(all: &[DrawRuns]) -> Verdict {
    let mut steps = 0usize;
    let mut bad = Vec::new();
    for (i, dr) in all.iter().enumerate() {
        for (pair, run) in PAIRS.iter().zip(&dr.runs).take(4) {
            for e in &run.trace.entries {
                steps += 1;
                let accounts: u128 = e
                    .balances
                    .iter()
                    .filter(|(k, _)| *k != "contract")
                    .map(|(_, m)| m.0)
                    .sum();
                let held = e.balances["contract"].0;
                if accounts != e.supply.accounts.0
                    || held != e.supply.contract.0
                    || accounts + held + e.supply.burned.0 != e.supply.minted.0
                {
                    bad.push(format!("draw {i} {pair:?} step {}", e.step));
                }
            }
            let first = &run.trace.entries[0];
            let minted: u128 = first.balances.values().map(|m| m.0).sum();
            if minted != first.supply.minted.0 {
                bad.push(format!("draw {i} {pair:?}: initial supply"));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{steps} trace steps checked, {} violations", bad.len()),
    )
}

/// Depth-bounded exploration of every call sequence by the requestor and an
/// outsider against a claimed, incomplete, unexpired task.
fn criterion_7() -> Verdict {
    let threshold = Money::ether(1);
    let mut ledger = Ledger::new(&LedgerConfig {
        threshold,
        ..LedgerConfig::default()
    });
    let requestor = ledger.create_account(Money::ether(100));
    let claimant = ledger.create_account(Money::ether(100));
    let outsider = ledger.create_account(Money::ether(100));
    let secret = Secret::from_slice(&[9u8; 32]).unwrap();
    let wrong = Secret::from_slice(&[8u8; 32]).unwrap();
    let expires = u64::MAX / 4;
    ledger
        .submit_transaction(
            requestor,
            &ContractCall::SubmitTask {
                function_name: "f".into(),
                hash_lock: secret.digest(),
                expires,
            },
            Money::ether(11),
            Tier::Fast,
        )
        .unwrap();
    let t = TaskId(0);
    ledger
        .submit_transaction(
            claimant,
            &ContractCall::ClaimTask { task_id: t },
            threshold,
            Tier::Fast,
        )
        .unwrap();

    let payment = Money::ether(10);
    let calls: Vec<(AccountId, ContractCall, Money)> = vec![
        (
            outsider,
            ContractCall::FinalizeExecutionNode { task_id: t, secret },
            Money::ZERO,
        ),
        (
            outsider,
            ContractCall::FinalizeExecutionNode {
                task_id: t,
                secret: wrong,
            },
            Money::ZERO,
        ),
        (outsider, ContractCall::ClaimTask { task_id: t }, threshold),
        (outsider, ContractCall::Timeout { task_id: t }, Money::ZERO),
        (
            requestor,
            ContractCall::FinalizeExecutionNode { task_id: t, secret },
            Money::ZERO,
        ),
        (
            requestor,
            ContractCall::FinalizeRequestor { task_id: t },
            Money::ZERO,
        ),
        (requestor, ContractCall::Timeout { task_id: t }, Money::ZERO),
        (requestor, ContractCall::ClaimTask { task_id: t }, threshold),
    ];
    let base_r = ledger.balance(requestor);
    let base_o = ledger.balance(outsider);
    let base_c = ledger.balance(claimant);
    let mut explored = 0u64;
    let mut violations = Vec::new();

    fn dfs(
        ledger: &Ledger,
        depth: usize,
        path: &mut Vec<usize>,
        calls: &[(AccountId, ContractCall, Money)],
        check: &mut dyn FnMut(&Ledger, &[usize]),
    ) {
        if depth == 0 {
            return;
        }
        for (i, (sender, call, value)) in calls.iter().enumerate() {
            let mut next = ledger.clone();
            path.push(i);
            if next
                .submit_transaction(*sender, call, *value, Tier::Fast)
                .is_ok()
            {
                check(&next, path);
                dfs(&next, depth - 1, path, calls, check);
            }
            path.pop();
        }
    }

    let mut check = |l: &Ledger, path: &[usize]| {
        explored += 1;
        let task = l.contract().task(t);
        let still_held = task
            .map(|x| x.claimed && !x.completed && x.payment == payment)
            .unwrap_or(false);
        let now_before_deadline = task.map(|x| l.now() <= x.deadline()).unwrap_or(false);
        if l.balance(outsider) > base_o {
            violations.push(format!("outsider gained via {path:?}"));
        }
        if l.balance(requestor) > base_r {
            violations.push(format!("requestor recovered funds via {path:?}"));
        }
        if l.balance(claimant) != base_c {
            violations.push(format!("claimant balance moved via {path:?}"));
        }
        if !(still_held && now_before_deadline) {
            violations.push(format!("task left claimed state via {path:?}"));
        }
    };
    dfs(&ledger, 6, &mut Vec::new(), &calls, &mut check);
    verdict(
        violations.is_empty() && explored > 0,
        format!(
            "{explored} sequences up to depth 6 over {} calls, {} violations{}",
            calls.len(),
            violations.len(),
            violations
                .first()
                .map(|v| format!("; first: {v}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_8(all: &[DrawRuns]) -> Verdict {
    let mut failures = Vec::new();
    let mut no_confirm_positive = 0;
    for (i, dr) in all.iter().enumerate() {
        let o: Vec<(i128, i128)> = dr
            .runs
            .iter()
            .map(|r| (r.outcome.requestor_payoff, r.outcome.node_payoff))
            .collect();
        let honest = o[0];
        let node_devs = [o[1].1, o[2].1];
        let req_devs = [o[3].0, o[4].0];
        if node_devs.iter().any(|p| *p >= honest.1) {
            failures.push(format!(
                "draw {i}: node deviation {node_devs:?} vs honest {}",
                honest.1
            ));
        }
        if req_devs.iter().any(|p| *p >= honest.0) {
            failures.push(format!(
                "draw {i}: requestor deviation {req_devs:?} vs honest {}",
                honest.0
            ));
        }
        if honest.0 <= 0 || honest.1 <= 0 {
            failures.push(format!("draw {i}: honest pair {honest:?}"));
        }
        if node_devs.iter().any(|p| *p >= 0) || o[4].0 >= 0 {
            failures.push(format!("draw {i}: a cheating party did not lose funds"));
        }
        if o[3].0 > 0 {
            no_confirm_positive += 1;
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} draws, {} failures; no-confirm payoff positive in {no_confirm_positive} draws (reported only)",
            all.len(),
            failures.len()
        ),
    )
}

fn flow_problems(run: &ScenarioRun) -> Vec<String> {
    let mut out = Vec::new();
    let Some(TraceRecord::Start { roles, .. }) = run.trace.entries.first().map(|e| &e.record)
    else {
        return vec!["no start record".into()];
    };
    let mut first_exec: BTreeMap<&str, u64> = BTreeMap::new();
    for e in &run.trace.entries {
        if let TraceRecord::Execution { actor, .. } = &e.record {
            first_exec.entry(actor.as_str()).or_insert(e.step);
        }
    }
    let tasks = run.ledger.contract().num_tasks();
    for (role, acct) in roles.iter().filter(|(r, _)| r.starts_with("node")) {
        let host = Principal::Host(*acct);
        for t in (0..tasks).map(TaskId) {
            for label in [Label::EncryptionKey(t), Label::PlaintextResult(t)] {
                if run.flow.ever_granted(label, host) || run.flow.can_see(host, label) {
                    out.push(format!("{role} saw {label:?}"));
                }
            }
            if let Some(step) = run.flow.first_grant(Label::Secret(t), host) {
                match first_exec.get(role.as_str()) {
                    Some(exec) if step >= *exec => {}
                    _ => out.push(format!(
                        "{role} saw the secret of task {t} at step {step} before executing"
                    )),
                }
            }
        }
    }
    out.extend(run.flow.violations().iter().map(|v| format!("{v:?}")));
    out
}

fn criterion_9(all: &[DrawRuns]) -> Verdict {
    let mut runs = 0usize;
    let mut problems = Vec::new();
    for dr in all {
        for run in &dr.runs {
            runs += 1;
            problems.extend(flow_problems(run));
        }
    }
    for r in RequestorStrategy::ALL {
        for n in NodeStrategy::ALL {
            for (nodes, destination, tamper) in [
                (1, Destination::Requestor, false),
                (4, Destination::Requestor, false),
                (1, Destination::ThirdParty, false),
                (2, Destination::Requestor, true),
            ] {
                let cfg = ScenarioConfig {
                    requestor: r,
                    node: n,
                    nodes,
                    destination,
                    tamper_delivery: tamper,
                    ..ScenarioConfig::default()
                };
                let run = run_scenario(&cfg).expect("runs");
                runs += 1;
                problems.extend(flow_problems(&run));
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "{runs} runs, {} problems{}",
            problems.len(),
            problems
                .first()
                .map(|p| format!("; first: {p}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_10(all: &[DrawRuns]) -> Verdict {
    let mut compared = 0;
    let mut differing = Vec::new();
    for r in RequestorStrategy::ALL {
        for n in NodeStrategy::ALL {
            for seed in [0, 1, 99] {
                for nodes in [1, 3] {
                    let mut cfg = ScenarioConfig {
                        requestor: r,
                        node: n,
                        seed,
                        nodes,
                        ..ScenarioConfig::default()
                    };
                    cfg.ledger.gas_charging = seed == 1;
                    let a = run_scenario(&cfg).expect("runs");
                    let b = run_scenario(&cfg).expect("runs");
                    compared += 1;
                    if a.trace.to_jsonl() != b.trace.to_jsonl() || a.outcome != b.outcome {
                        differing.push(format!("{r:?}/{n:?} seed {seed} nodes {nodes}"));
                    }
                }
            }
        }
    }
    for dr in all.iter().take(50) {
        for (pair, run) in PAIRS.iter().zip(&dr.runs) {
            let again = run_scenario(&config(&dr.draw, pair.0, pair.1, 0)).expect("runs");
            compared += 1;
            if again.trace.to_jsonl() != run.trace.to_jsonl() {
                differing.push(format!("draw {pair:?}"));
            }
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{compared} scenario pairs compared byte for byte, {} differ",
            differing.len()
        ),
    )
}

fn main() {
    let names = [
        "payoff matrix equals closed forms",
        "gas per function and per task",
        "latency is four confirmations",
        "first funded claim wins",
        "hash lock accepts iff digest matches",
        "funds conserved at every step",
        "no stealing of escrowed funds",
        "honest play strictly dominates",
        "host never sees keys or plaintext",
        "identical seeds give identical traces",
    ];

    let started = Instant::now();
    let all: Vec<DrawRuns> = draws()
        .into_iter()
        .map(|d| DrawRuns {
            draw: d,
            runs: PAIRS
                .iter()
                .map(|(r, n)| run_scenario(&config(&d, *r, *n, 0)).expect("rational draw runs"))
                .collect(),
        })
        .collect();
    // Four of the five runs per draw belong to criterion 1.
    let c1_secs = started.elapsed().as_secs_f64() * 4.0 / 5.0;

    let mut failed = 0;
    let mut report = |i: usize, v: Verdict, secs: f64| {
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<40} {}  ({}; {secs:.2}s)",
            i + 1,
            names[i],
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    };
    let timed = |f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        (v, t.elapsed().as_secs_f64())
    };

    report(0, criterion_1(&all, c1_secs), c1_secs);
    let checks: [&dyn Fn() -> Verdict; 9] = [
        &criterion_2,
        &criterion_3,
        &criterion_4,
        &criterion_5,
        &|| criterion_6(&all),
        &criterion_7,
        &|| criterion_8(&all),
        &|| criterion_9(&all),
        &|| criterion_10(&all),
    ];
    for (i, check) in checks.iter().enumerate() {
        let (v, secs) = timed(*check);
        report(i + 1, v, secs);
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

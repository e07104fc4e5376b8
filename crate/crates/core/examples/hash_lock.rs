//! The hash lock at the contract level: a wrong secret is refused, an
//! outsider with the right secret is refused, the claimant is paid.

use spoc_sim::contract::{ContractCall, TaskId};
use spoc_sim::crypto::{generate_secret, Secret};
use spoc_sim::{Ledger, LedgerConfig, Money, Tier};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut ledger = Ledger::new(&LedgerConfig::default());
    let requestor = ledger.create_account(Money::ether(20));
    let node = ledger.create_account(Money::ether(20));
    let outsider = ledger.create_account(Money::ether(20));

    let secret = generate_secret(11);
    println!("secret    {secret}");
    println!("hash lock {}", secret.digest());

    let submit = ContractCall::SubmitTask {
        function_name: "sha256".into(),
        hash_lock: secret.digest(),
        expires: 3600,
    };
    let task_id = TaskId(0);
    let steps: [(&str, _, ContractCall, Money); 5] = [
        ("requestor submits", requestor, submit, Money::ether(11)),
        (
            "node claims",
            node,
            ContractCall::ClaimTask { task_id },
            ledger.contract().threshold(),
        ),
        (
            "node, wrong secret",
            node,
            ContractCall::FinalizeExecutionNode {
                task_id,
                secret: Secret([0x42; 32]),
            },
            Money::ZERO,
        ),
        (
            "outsider, right secret",
            outsider,
            ContractCall::FinalizeExecutionNode { task_id, secret },
            Money::ZERO,
        ),
        (
            "node, right secret",
            node,
            ContractCall::FinalizeExecutionNode { task_id, secret },
            Money::ZERO,
        ),
    ];
    for (label, who, call, value) in steps {
        let r = ledger.submit_transaction(who, &call, value, Tier::Fast)?;
        println!("{label:<24} {:?}", r.outcome);
    }
    let finish = ledger.submit_transaction(
        requestor,
        &ContractCall::FinalizeRequestor { task_id },
        Money::ZERO,
        Tier::Fast,
    )?;
    println!("{:<24} {:?}", "requestor confirms", finish.outcome);
    println!();
    for (name, who) in [
        ("requestor", requestor),
        ("node", node),
        ("outsider", outsider),
    ] {
        println!("{name:<10} {} ether", ledger.balance(who).as_ether_f64());
    }
    println!("contract   {} wei", ledger.contract_balance());
    Ok(())
}

//! One honest task from submission to confirmation, with the trace printed.

use spoc_sim::harness::{run_scenario, ScenarioConfig, TraceRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_scenario(&ScenarioConfig::default())?;

    for entry in &run.trace.entries {
        let what = match &entry.record {
            TraceRecord::Call {
                actor,
                function,
                outcome,
                ..
            } => format!("{actor} {function} -> {outcome:?}"),
            TraceRecord::Event { event } => {
                format!("event {:?} task {}", event.kind, event.task_id)
            }
            TraceRecord::Enclave { actor, op, ok, .. } => format!("{actor} enclave {op} ok={ok}"),
            TraceRecord::Execution { actor, cost, .. } => format!("{actor} executed, cost {cost}"),
            TraceRecord::Message { from, to, what, .. } => format!("{from} -> {to}: {what}"),
            TraceRecord::ResultChecked { valid, .. } => {
                format!("requestor checked result: valid={valid}")
            }
            other => format!("{other:?}").chars().take(60).collect(),
        };
        println!("{:>4} t={:>5}  {what}", entry.step, entry.time);
    }

    let o = &run.outcome;
    println!();
    println!("requestor payoff {} wei", o.requestor_payoff);
    println!("node payoff      {} wei", o.node_payoff);
    println!("elapsed          {} s", o.elapsed);
    println!(
        "result           {}",
        hex::encode(run.requestor_result.unwrap_or_default())
    );
    println!("invariants hold  {}", run.invariants.all_hold());
    Ok(())
}

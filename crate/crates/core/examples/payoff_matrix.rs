//! Full strategy matrix at one parameter point, then a seeded dominance sweep.

use spoc_sim::harness::{dominance_check, payoff_matrix, ParamGrid, PayoffParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let matrix = payoff_matrix(&PayoffParams::default(), 0)?;
    println!("{matrix}");
    println!(
        "closed-form mismatches: {:?}",
        matrix.closed_form_mismatches()
    );
    println!();

    let report = dominance_check(&ParamGrid::random(200, 42), 0)?;
    println!("{report}");
    println!(
        "largest no-confirm payoff: {} wei",
        report.max_no_confirm_payoff
    );
    Ok(())
}

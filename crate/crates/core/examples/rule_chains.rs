//! Chains induced by memoryless rules, and how fast each reaches consensus.

use opinionlab::chain::{sample_chain_from_rule, Boundary};
use opinionlab::dynamics::{majority_rule, mean_rule, voter_rule};
use opinionlab::hitting::step_expectations_recurrence;
use opinionlab::MemorylessRule;

fn main() -> opinionlab::Result<()> {
    let (n, z) = (32, 1);
    let rules: Vec<(&str, MemorylessRule)> = vec![
        ("voter", voter_rule()),
        ("mean:5", mean_rule(5)?),
        ("majority:3", majority_rule(3)?),
        ("majority:5", majority_rule(5)?),
        // adopt 1 only when the whole sample agrees, otherwise keep
        (
            "unanimous:2",
            MemorylessRule::new(vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0])?,
        ),
    ];
    for (name, rule) in rules {
        let chain = sample_chain_from_rule(&rule, n, z, Boundary::Absorbing)?;
        let report = step_expectations_recurrence(&chain)?;
        let slowest = (z + 1..=n)
            .max_by(|&a, &b| report.step(a).total_cmp(&report.step(b)))
            .unwrap();
        println!(
            "{name:<12} E_1[tau_n] = {:>14.4e}   slowest step {:>2} -> {slowest:>2}",
            report.total(),
            slowest - 1
        );
    }
    Ok(())
}

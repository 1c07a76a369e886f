//! Three-opinion voter runs; merging the wrong opinions gives the binary chain.

use opinionlab::chain::{voter_chain, Boundary};
use opinionlab::hitting::step_expectations_recurrence;
use opinionlab::sim::{collapse_opinions, init_adversarial, run_trials, InitKind, TrialConfig};
use opinionlab::DynamicsKind;

fn main() -> opinionlab::Result<()> {
    let n = 16;
    let start = init_adversarial(n, 1, 3)?;
    println!("start     {:?}", start.opinions());
    println!("collapsed {:?}", collapse_opinions(&start).opinions());

    let config = TrialConfig {
        labels: 3,
        ..TrialConfig::new(DynamicsKind::Voter, n, 1, InitKind::Adversarial)
    };
    let results = run_trials(&config, 5_000, 3)?;
    let mean = results.iter().map(|r| r.rounds as f64).sum::<f64>() / results.len() as f64;
    let exact = step_expectations_recurrence(&voter_chain(n, 1, Boundary::Absorbing)?)?.total();
    println!("three opinions: mean {mean:.1} rounds, binary exact {exact:.1}");
    Ok(())
}

//! Monte Carlo voter runs against the exact expectation.

use opinionlab::chain::{voter_chain, Boundary};
use opinionlab::hitting::step_expectations_recurrence;
use opinionlab::sim::{run_trials, InitKind, TrialConfig};
use opinionlab::DynamicsKind;

fn main() -> opinionlab::Result<()> {
    let n = 32;
    let trials = 2_000;
    let config = TrialConfig::new(DynamicsKind::Voter, n, 1, InitKind::Adversarial);
    let results = run_trials(&config, trials, 2024)?;

    let rounds: Vec<f64> = results.iter().map(|r| r.rounds as f64).collect();
    let mean = rounds.iter().sum::<f64>() / trials as f64;
    let var = rounds.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let exact = step_expectations_recurrence(&voter_chain(n, 1, Boundary::Absorbing)?)?.total();

    println!("n = {n}, {trials} trials from the adversarial start");
    println!(
        "sample mean  {mean:.1} +- {:.1}",
        (var / trials as f64).sqrt()
    );
    println!("exact        {exact:.1}");
    Ok(())
}

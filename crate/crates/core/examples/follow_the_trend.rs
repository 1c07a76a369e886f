//! Follow-the-trend against the voter model from a uniform start.

use opinionlab::sim::{run_trials, InitKind, TrialConfig};
use opinionlab::DynamicsKind;

fn mean_parallel_rounds(dynamics: DynamicsKind, n: usize) -> opinionlab::Result<f64> {
    let config = TrialConfig::new(dynamics, n, 1, InitKind::Uniform);
    let results = run_trials(&config, 50, 11)?;
    Ok(results.iter().map(|r| r.parallel_rounds).sum::<f64>() / results.len() as f64)
}

fn main() -> opinionlab::Result<()> {
    println!("{:>6} {:>5} {:>10} {:>10}", "n", "ell", "voter", "trend");
    for exp in 4..=9 {
        let n = 1usize << exp;
        let trend = DynamicsKind::Trend(None);
        println!(
            "{n:>6} {:>5} {:>10.1} {:>10.1}",
            trend.trend_ell(n).unwrap(),
            mean_parallel_rounds(DynamicsKind::Voter, n)?,
            mean_parallel_rounds(trend, n)?
        );
    }
    Ok(())
}

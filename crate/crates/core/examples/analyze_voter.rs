//! Exact hitting times of the voter chain, computed three ways.
//!
//! ```text
//! cargo run --example analyze_voter -- 64
//! ```

use opinionlab::chain::{voter_chain, Boundary};
use opinionlab::hitting::{
    hitting_time_oracle, step_expectations_detailed_balance, step_expectations_recurrence,
    voter_double_sum, voter_reference_scale,
};

fn main() -> opinionlab::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(Ok(64), |s| s.parse())
        .expect("n must be an integer");
    let chain = voter_chain(n, 1, Boundary::Absorbing)?;

    let rec = step_expectations_recurrence(&chain)?;
    let bal = step_expectations_detailed_balance(&chain)?;
    let solve = hitting_time_oracle(&chain, 1)?;

    println!("n = {n}, one source");
    println!("recurrence        {:.6}", rec.total());
    println!("detailed balance  {:.6}", bal.total());
    println!("linear solve      {solve:.6}");
    println!(
        "per agent         {:.3} parallel rounds",
        rec.total() / n as f64
    );
    if n >= 3 {
        println!("E / n^2           {:.6}", rec.total() / (n * n) as f64);
        println!(
            "E / 2n^2 H_(n-1)  {:.6}",
            rec.total() / voter_reference_scale(n)
        );
        println!("double sum        {:.6}", voter_double_sum(n));
    }
    println!("from n/2          {:.3}", rec.total_from(n / 2)?);
    Ok(())
}

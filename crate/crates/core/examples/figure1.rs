//! A reduced voter-against-trend grid, written as CSV and SVG.
//!
//! ```text
//! cargo run --release --example figure1 -- out.csv out.svg
//! ```

use std::path::PathBuf;

use opinionlab::experiment::{run_experiment, ExperimentSpec};
use opinionlab::plot::render_svg;

fn main() -> opinionlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let csv = PathBuf::from(args.next().unwrap_or_else(|| "figure1.csv".into()));
    let svg = PathBuf::from(args.next().unwrap_or_else(|| "figure1.svg".into()));

    let mut spec = ExperimentSpec::figure1(false);
    spec.series[0].n_grid.truncate(5);
    spec.series[1].n_grid.truncate(7);
    spec.trials = 20;

    let table = run_experiment(&spec)?;
    table.write_csv_file(&csv)?;
    let cells = table.summarize();
    std::fs::write(&svg, render_svg(&cells)).map_err(|e| opinionlab::Error::Io {
        path: svg.clone(),
        source: e,
    })?;
    for cell in cells {
        println!(
            "{:<6} {:>5} {:<12} {:>9.1}",
            cell.dynamics, cell.n, cell.init, cell.mean_parallel_rounds
        );
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

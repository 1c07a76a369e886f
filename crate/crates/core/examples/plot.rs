//! Re-plot an experiment CSV.
//!
//! ```text
//! cargo run --example plot -- figure1.csv figure1.svg
//! ```

use std::path::PathBuf;

fn main() -> opinionlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(csv), Some(svg)) = (args.next(), args.next()) else {
        eprintln!("usage: plot <csv> <svg>");
        std::process::exit(1);
    };
    opinionlab::plot::plot_csv(&PathBuf::from(csv), &PathBuf::from(&svg))?;
    println!("wrote {svg}");
    Ok(())
}

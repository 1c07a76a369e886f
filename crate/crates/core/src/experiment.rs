//! Grids of simulation cells and their CSV tables.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::DynamicsKind;
use crate::error::{Error, Result};
use crate::seeding::seed_for_label;
use crate::sim::{default_max_rounds, run_trials, InitKind, TrialConfig};

pub const CSV_HEADER: [&str; 8] = [
    "dynamics",
    "n",
    "init",
    "trial",
    "seed",
    "rounds",
    "parallel_rounds",
    "converged",
];

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

/// One dynamics and the population sizes it runs at.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub dynamics: DynamicsKind,
    pub n_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub series: Vec<Series>,
    pub z: usize,
    pub inits: Vec<InitKind>,
    pub trials: usize,
    pub master_seed: u64,
    /// Cap in parallel rounds; `None` uses [`default_max_rounds`].
    pub max_parallel_rounds: Option<f64>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn powers_of_two(exponents: std::ops::RangeInclusive<u32>) -> Vec<usize> {
    exponents.map(|i| 1usize << i).collect()
}

/// `2^3..=2^10`.
pub fn voter_grid() -> Vec<usize> {
    powers_of_two(3..=10)
}

/// `2^3..=2^13`, or `2^3..=2^17` with `full`.
pub fn trend_grid(full: bool) -> Vec<usize> {
    powers_of_two(3..=if full { 17 } else { 13 })
}

fn default_grid(dynamics: &DynamicsKind, full: bool) -> Vec<usize> {
    if dynamics.is_stateful() {
        trend_grid(full)
    } else {
        voter_grid()
    }
}

impl ExperimentSpec {
    /// Voter and trend, both initialisations, 100 trials, one source.
    pub fn figure1(full: bool) -> Self {
        Self {
            series: vec![
                Series {
                    dynamics: DynamicsKind::Voter,
                    n_grid: voter_grid(),
                },
                Series {
                    dynamics: DynamicsKind::Trend(None),
                    n_grid: trend_grid(full),
                },
            ],
            z: 1,
            inits: vec![InitKind::Uniform, InitKind::Adversarial],
            trials: DEFAULT_TRIALS,
            master_seed: DEFAULT_SEED,
            max_parallel_rounds: None,
            out: None,
            svg: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() || self.series.iter().any(|s| s.n_grid.is_empty()) {
            return Err(Error::invalid("experiment grids must be non-empty"));
        }
        if self.inits.is_empty() {
            return Err(Error::invalid("at least one init kind is required"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if let Some(cap) = self.max_parallel_rounds {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(Error::invalid(format!("bad max_parallel_rounds {cap}")));
            }
        }
        for series in &self.series {
            if let Some(&n) = series.n_grid.iter().find(|&&n| n <= self.z) {
                return Err(Error::invalid(format!(
                    "n = {n} leaves no non-source agent for z = {}",
                    self.z
                )));
            }
        }
        Ok(())
    }

    /// Number of rows [`run_experiment`] produces.
    pub fn row_count(&self) -> usize {
        self.series.iter().map(|s| s.n_grid.len()).sum::<usize>() * self.inits.len() * self.trials
    }

    fn max_rounds(&self, n: usize) -> u64 {
        match self.max_parallel_rounds {
            Some(cap) => ((cap * n as f64).ceil() as u64).max(1),
            None => default_max_rounds(n),
        }
    }
}

/// A JSON config: every field optional, names as in the CSV where they
/// overlap.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub series: Option<Vec<SeriesConfig>>,
    pub dynamics: Option<Vec<String>>,
    pub n: Option<Vec<usize>>,
    pub z: Option<usize>,
    pub init: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub max_parallel_rounds: Option<f64>,
    pub ell: Option<usize>,
    pub full: Option<bool>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub dynamics: String,
    pub n: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: ExperimentConfig) -> Self {
        Self {
            series: over.series.or(self.series),
            dynamics: over.dynamics.or(self.dynamics),
            n: over.n.or(self.n),
            z: over.z.or(self.z),
            init: over.init.or(self.init),
            trials: over.trials.or(self.trials),
            seed: over.seed.or(self.seed),
            max_parallel_rounds: over.max_parallel_rounds.or(self.max_parallel_rounds),
            ell: over.ell.or(self.ell),
            full: over.full.or(self.full),
            out: over.out.or(self.out),
            svg: over.svg.or(self.svg),
        }
    }

    /// Applies the config on top of the figure-1 defaults. `dynamics` replaces
    /// the series list (each on its default grid unless `n` is given); `n`
    /// alone replaces every grid; `ell` fixes the trend sample size.
    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let full = self.full.unwrap_or(false);
        let mut spec = ExperimentSpec::figure1(full);
        if let Some(series) = self.series {
            spec.series = series
                .into_iter()
                .map(|s| {
                    Ok(Series {
                        dynamics: s.dynamics.parse()?,
                        n_grid: s.n,
                    })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(names) = self.dynamics {
            spec.series = names
                .iter()
                .map(|name| {
                    let dynamics: DynamicsKind = name.parse()?;
                    let n_grid = default_grid(&dynamics, full);
                    Ok(Series { dynamics, n_grid })
                })
                .collect::<Result<_>>()?;
        }
        if let Some(grid) = self.n {
            for series in &mut spec.series {
                series.n_grid = grid.clone();
            }
        }
        if let Some(ell) = self.ell {
            for series in &mut spec.series {
                if let DynamicsKind::Trend(_) = series.dynamics {
                    series.dynamics = DynamicsKind::Trend(Some(ell));
                }
            }
        }
        if let Some(inits) = self.init {
            spec.inits = inits.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(z) = self.z {
            spec.z = z;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(seed) = self.seed {
            spec.master_seed = seed;
        }
        spec.max_parallel_rounds = self.max_parallel_rounds;
        spec.out = self.out;
        spec.svg = self.svg;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub dynamics: String,
    pub n: usize,
    pub init: InitKind,
    pub trial: usize,
    pub seed: u64,
    pub rounds: u64,
    pub parallel_rounds: f64,
    pub converged: bool,
}

impl ExperimentRow {
    fn record(&self) -> [String; 8] {
        [
            self.dynamics.clone(),
            self.n.to_string(),
            self.init.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.rounds.to_string(),
            format_g6(self.parallel_rounds),
            self.converged.to_string(),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
}

/// Label that seeds a cell; stable across runs and grid changes.
pub fn cell_label(dynamics: &DynamicsKind, n: usize, init: InitKind) -> String {
    format!("{dynamics}/{n}/{init}")
}

/// Runs one cell: `trials` independent runs of `dynamics` at size `n`.
pub fn run_cell(
    spec: &ExperimentSpec,
    dynamics: &DynamicsKind,
    n: usize,
    init: InitKind,
) -> Result<Vec<ExperimentRow>> {
    let config = TrialConfig {
        max_rounds: spec.max_rounds(n),
        ..TrialConfig::new(dynamics.clone(), n, spec.z, init)
    };
    let cell_seed = seed_for_label(spec.master_seed, &cell_label(dynamics, n, init));
    let results = run_trials(&config, spec.trials, cell_seed)?;
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(trial, r)| ExperimentRow {
            dynamics: dynamics.to_string(),
            n,
            init,
            trial,
            seed: r.seed,
            rounds: r.rounds,
            parallel_rounds: r.parallel_rounds,
            converged: r.converged,
        })
        .collect())
}

/// Every cell of the grid, series by series, then by `n`, then by init.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.row_count());
    for series in &spec.series {
        for &n in &series.n_grid {
            for &init in &spec.inits {
                rows.extend(run_cell(spec, &series.dynamics, n, init)?);
            }
        }
    }
    Ok(ExperimentTable { rows })
}

impl ExperimentTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::io(Path::new("<csv>"), e.into());
        out.write_record(CSV_HEADER).map_err(io)?;
        for row in &self.rows {
            out.write_record(row.record()).map_err(io)?;
        }
        out.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        self.write_csv(&mut writer).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    /// Parses a table; errors carry the 1-based line number. `source` only
    /// labels error messages.
    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let parse = |line: u64, msg: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            msg,
        };
        let mut input = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut records = input.records();
        match records.next() {
            None => return Err(parse(1, "missing header".into())),
            Some(Err(e)) => return Err(parse(csv_line(&e).unwrap_or(1), e.to_string())),
            Some(Ok(header)) => {
                if header.iter().ne(CSV_HEADER) {
                    return Err(parse(
                        1,
                        format!("expected header `{}`", CSV_HEADER.join(",")),
                    ));
                }
            }
        }
        let mut rows = Vec::new();
        for record in records {
            let record = record.map_err(|e| {
                let line = csv_line(&e).unwrap_or(0);
                parse(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != CSV_HEADER.len() {
                return Err(parse(
                    line,
                    format!(
                        "expected {} fields, found {}",
                        CSV_HEADER.len(),
                        record.len()
                    ),
                ));
            }
            let field = |i: usize| &record[i];
            let number = |i: usize| -> Result<u64> {
                field(i)
                    .parse()
                    .map_err(|_| parse(line, format!("bad {} `{}`", CSV_HEADER[i], field(i))))
            };
            let init = field(2)
                .parse::<InitKind>()
                .map_err(|_| parse(line, format!("bad init `{}`", field(2))))?;
            let parallel_rounds: f64 = field(6)
                .parse()
                .map_err(|_| parse(line, format!("bad parallel_rounds `{}`", field(6))))?;
            let converged = match field(7) {
                "true" => true,
                "false" => false,
                other => return Err(parse(line, format!("bad converged `{other}`"))),
            };
            let n = number(1)? as usize;
            if n == 0 {
                return Err(parse(line, "n must be positive".into()));
            }
            rows.push(ExperimentRow {
                dynamics: field(0).to_string(),
                n,
                init,
                trial: number(3)? as usize,
                seed: number(4)?,
                rounds: number(5)?,
                parallel_rounds,
                converged,
            });
        }
        Ok(Self { rows })
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }

    /// Per-cell means, cells in order of first appearance.
    pub fn summarize(&self) -> Vec<CellSummary> {
        let mut cells: Vec<CellSummary> = Vec::new();
        for row in &self.rows {
            let found = cells
                .iter_mut()
                .find(|c| c.dynamics == row.dynamics && c.n == row.n && c.init == row.init);
            let cell = match found {
                Some(cell) => cell,
                None => {
                    cells.push(CellSummary {
                        dynamics: row.dynamics.clone(),
                        n: row.n,
                        init: row.init,
                        trials: 0,
                        converged: 0,
                        mean_parallel_rounds: 0.0,
                    });
                    cells.last_mut().unwrap()
                }
            };
            cell.trials += 1;
            cell.converged += usize::from(row.converged);
            cell.mean_parallel_rounds += row.parallel_rounds;
        }
        for cell in &mut cells {
            cell.mean_parallel_rounds /= cell.trials as f64;
        }
        cells
    }
}

fn csv_line(e: &csv::Error) -> Option<u64> {
    e.position().map(|p| p.line())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub dynamics: String,
    pub n: usize,
    pub init: InitKind,
    pub trials: usize,
    pub converged: usize,
    pub mean_parallel_rounds: f64,
}

/// Six significant digits in the style of C's `%g`.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            series: vec![
                Series {
                    dynamics: DynamicsKind::Voter,
                    n_grid: vec![4, 8],
                },
                Series {
                    dynamics: DynamicsKind::Trend(None),
                    n_grid: vec![8],
                },
            ],
            trials: 5,
            ..ExperimentSpec::figure1(false)
        }
    }

    #[test]
    fn figure1_grid_sizes() {
        let spec = ExperimentSpec::figure1(false);
        assert_eq!(spec.series[0].n_grid.len(), 8);
        assert_eq!(spec.series[0].n_grid[0], 8);
        assert_eq!(*spec.series[0].n_grid.last().unwrap(), 1024);
        assert_eq!(*spec.series[1].n_grid.last().unwrap(), 8192);
        let full = ExperimentSpec::figure1(true);
        assert_eq!(full.series[1].n_grid.len(), 15);
        assert_eq!(*full.series[1].n_grid.last().unwrap(), 1 << 17);
        assert_eq!(spec.trials, 100);
        assert_eq!(spec.z, 1);
        assert_eq!(spec.inits, vec![InitKind::Uniform, InitKind::Adversarial]);
    }

    #[test]
    fn rows_per_cell_and_parallel_rounds() {
        let spec = tiny_spec();
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.rows.len(), spec.row_count());
        assert_eq!(table.rows.len(), 3 * 2 * 5);
        for row in &table.rows {
            assert_eq!(row.parallel_rounds, row.rounds as f64 / row.n as f64);
            assert!(row.converged);
        }
        let cells = table.summarize();
        assert_eq!(cells.len(), 6);
        assert!(cells.iter().all(|c| c.trials == 5));
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let spec = tiny_spec();
        let mut a = Vec::new();
        run_experiment(&spec).unwrap().write_csv(&mut a).unwrap();
        let mut b = Vec::new();
        run_experiment(&spec).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("dynamics,n,init,trial,seed,rounds,parallel_rounds,converged\n"));
        let back = ExperimentTable::read_csv(a.as_slice(), Path::new("t.csv")).unwrap();
        let mut c = Vec::new();
        back.write_csv(&mut c).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn cells_are_independent_of_grid() {
        let spec = tiny_spec();
        let small = ExperimentSpec {
            series: vec![Series {
                dynamics: DynamicsKind::Voter,
                n_grid: vec![8],
            }],
            ..spec.clone()
        };
        let full = run_experiment(&spec).unwrap();
        let only = run_experiment(&small).unwrap();
        let from_full: Vec<_> = full
            .rows
            .iter()
            .filter(|r| r.dynamics == "voter" && r.n == 8)
            .cloned()
            .collect();
        assert_eq!(from_full, only.rows);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "dynamics,n,init,trial,seed,rounds,parallel_rounds,converged\n\
                   voter,8,uniform,0,1,10,1.25,true\n\
                   voter,8,sideways,1,1,10,1.25,true\n";
        match ExperimentTable::read_csv(bad.as_bytes(), Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "dynamics,n,init,trial,seed,rounds,parallel_rounds,converged\nvoter,8\n";
        assert!(matches!(
            ExperimentTable::read_csv(short.as_bytes(), Path::new("x.csv")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentTable::read_csv("a,b\n".as_bytes(), Path::new("x.csv")),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentTable::read_csv("".as_bytes(), Path::new("x.csv")),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn config_overrides() {
        let file: ExperimentConfig = serde_json::from_str(
            r#"{"dynamics": ["voter", "trend"], "n": [16, 32], "trials": 7, "seed": 9, "ell": 12}"#,
        )
        .unwrap();
        let cli = ExperimentConfig {
            trials: Some(3),
            init: Some(vec!["adversarial".into()]),
            ..Default::default()
        };
        let spec = file.overridden_by(cli).into_spec().unwrap();
        assert_eq!(spec.trials, 3);
        assert_eq!(spec.master_seed, 9);
        assert_eq!(spec.inits, vec![InitKind::Adversarial]);
        assert_eq!(spec.series[1].dynamics, DynamicsKind::Trend(Some(12)));
        assert!(spec.series.iter().all(|s| s.n_grid == vec![16, 32]));

        let only_trend = ExperimentConfig {
            dynamics: Some(vec!["trend".into()]),
            full: Some(true),
            ..Default::default()
        }
        .into_spec()
        .unwrap();
        assert_eq!(only_trend.series.len(), 1);
        assert_eq!(only_trend.series[0].n_grid.len(), 15);

        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 3}"#).is_err());
        let zero = ExperimentConfig {
            trials: Some(0),
            ..Default::default()
        };
        assert!(zero.into_spec().is_err());
        let empty = ExperimentConfig {
            n: Some(vec![]),
            ..Default::default()
        };
        assert!(empty.into_spec().is_err());
    }

    #[test]
    fn cap_in_parallel_rounds() {
        let spec = ExperimentSpec {
            series: vec![Series {
                dynamics: DynamicsKind::Voter,
                n_grid: vec![64],
            }],
            inits: vec![InitKind::Adversarial],
            trials: 4,
            max_parallel_rounds: Some(0.5),
            ..ExperimentSpec::figure1(false)
        };
        let table = run_experiment(&spec).unwrap();
        for row in &table.rows {
            assert!(!row.converged);
            assert_eq!(row.rounds, 32);
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_g6(0.0), "0");
        assert_eq!(format_g6(1.25), "1.25");
        assert_eq!(format_g6(104.34375), "104.344");
        assert_eq!(format_g6(123456.4), "123456");
        assert_eq!(format_g6(1234567.0), "1.23457e+06");
        assert_eq!(format_g6(999999.5), "1e+06");
        assert_eq!(format_g6(0.0001234567), "0.000123457");
        assert_eq!(format_g6(0.00001), "1e-05");
        assert_eq!(format_g6(2.0), "2");
    }
}

//! Table reproduction presets: sweeps over the gyro-period at the three
//! observation times, rendered as CSV and Markdown.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use drift_ap_core::{CaseKind, SchemeKind, SpeedMode};

use crate::config::RunConfig;
use crate::harness::{max_relative_difference_pct, run, RunReport};
use crate::output::fmt_f64;
use crate::HarnessError;

/// `(epsilon, t_final)` pairs of the sweep.
pub const SWEEP: [(f64, f64); 3] = [(1e-5, 1.0), (1e-6, 0.1), (1.5e-8, 0.01)];

/// Environment variable capping the worker count of parallel sweeps.
pub const THREADS_ENV: &str = "DRIFT_AP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    ErrorsResolved,
    ErrorsNonresolved,
    DtTable,
    CpuTable,
    Eps1Compare,
    Unprepared,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::ErrorsResolved,
        Preset::ErrorsNonresolved,
        Preset::DtTable,
        Preset::CpuTable,
        Preset::Eps1Compare,
        Preset::Unprepared,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::ErrorsResolved => "errors-resolved",
            Preset::ErrorsNonresolved => "errors-nonresolved",
            Preset::DtTable => "dt-table",
            Preset::CpuTable => "cpu-table",
            Preset::Eps1Compare => "eps1-compare",
            Preset::Unprepared => "unprepared",
        }
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| HarnessError::UnknownPreset(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(usize),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(n) => n.to_string(),
        }
    }

    fn markdown(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => format!("{v:.3e}"),
            Cell::Int(n) => n.to_string(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(n) => Some(*n as f64),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, title: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            title: title.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.headers.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### {}\n\n| {} |\n|", self.title, self.headers.join(" | "));
        for _ in &self.headers {
            s.push_str("---|");
        }
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::markdown).collect();
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        }
        s
    }
}

/// Grid and CFL shared by every run of a preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub nx: usize,
    pub ny: usize,
    pub cfl: f64,
    /// Steps used to read off the time step in `dt-table`.
    pub dt_probe_steps: usize,
    /// Repetitions of the non-resolved run in `cpu-table`; the minimum
    /// wall time is kept.
    pub cpu_repeats: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { nx: 100, ny: 100, cfl: 0.5, dt_probe_steps: 20, cpu_repeats: 5 }
    }
}

/// Worker count from `DRIFT_AP_THREADS`, defaulting to the available
/// parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn base(opts: &TableOptions, scheme: SchemeKind, mode: SpeedMode, epsilon: f64, t_final: f64) -> RunConfig {
    RunConfig { scheme, mode, epsilon, t_final, nx: opts.nx, ny: opts.ny, cfl: opts.cfl, ..Default::default() }
}

fn run_all(configs: Vec<RunConfig>) -> Result<Vec<RunReport>, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::Precondition(e.to_string()))?;
    pool.install(|| configs.par_iter().map(run).collect())
}

fn label(r: &RunReport) -> String {
    match (r.config.scheme, r.config.effective_mode()) {
        (SchemeKind::Ap, SpeedMode::NonResolved) => "NAP",
        (SchemeKind::Ap, SpeedMode::Resolved) => "AP resolved",
        (SchemeKind::Conventional, SpeedMode::Resolved) => "conventional resolved",
        (SchemeKind::Conventional, SpeedMode::NonResolved) => "conventional non-resolved",
        (SchemeKind::DriftLimit, _) => "drift limit",
    }
    .to_string()
}

fn status(r: &RunReport) -> Cell {
    Cell::Text(match &r.diverged {
        Some(e) => format!("diverged at t={:.3e} ({})", r.final_time, e.to_string().replace(',', ";")),
        None => "ok".into(),
    })
}

const ERROR_HEADERS: [&str; 9] =
    ["epsilon", "t", "scheme", "n_rel_pct", "nu_x_rel_pct", "nu_y_rel_pct", "nu_z_abs", "steps", "status"];

fn error_row(r: &RunReport) -> Vec<Cell> {
    let m = r.metrics;
    vec![
        Cell::Num(r.config.epsilon),
        Cell::Num(r.config.t_final),
        Cell::Text(label(r)),
        Cell::Num(m.n_rel_pct),
        Cell::Num(m.mx_rel_pct),
        Cell::Num(m.my_rel_pct),
        Cell::Num(m.mz_abs),
        Cell::Int(r.steps),
        status(r),
    ]
}

fn error_tables(opts: &TableOptions, mode: SpeedMode, name: &str) -> Result<Vec<Table>, HarnessError> {
    let mut configs = Vec::new();
    for scheme in [SchemeKind::Conventional, SchemeKind::Ap] {
        for (eps, t) in SWEEP {
            configs.push(base(opts, scheme, mode, eps, t));
        }
    }
    let reports = run_all(configs)?;
    let mut tables = Vec::new();
    for (k, scheme) in ["conventional", "ap"].iter().enumerate() {
        let mode_label = if mode == SpeedMode::Resolved { "resolved" } else { "non-resolved" };
        let mut t = Table::new(
            &format!("{name}_{scheme}"),
            &format!("Differences to the drift-fluid limit, {mode_label} {scheme} scheme"),
            &ERROR_HEADERS,
        );
        t.rows = reports[3 * k..3 * k + 3].iter().map(error_row).collect();
        tables.push(t);
    }
    Ok(tables)
}

fn dt_table(opts: &TableOptions) -> Result<Vec<Table>, HarnessError> {
    let mut configs = Vec::new();
    for (eps, t) in SWEEP {
        for mode in [SpeedMode::Resolved, SpeedMode::NonResolved] {
            configs.push(RunConfig { max_steps: Some(opts.dt_probe_steps), ..base(opts, SchemeKind::Ap, mode, eps, t) });
        }
    }
    let reports = run_all(configs)?;
    let mut t = Table::new(
        "dt_table",
        "Logarithms of the gyro-period and of the time steps",
        &["epsilon", "log10_epsilon", "log10_dt_ap_resolved", "log10_dt_nap", "analytic_log10_dt_resolved"],
    );
    for (k, (eps, _)) in SWEEP.iter().enumerate() {
        let (res, nap) = (&reports[2 * k], &reports[2 * k + 1]);
        // Sound speed only, from a quiescent state: cfl / (2 c / h).
        let analytic = opts.cfl / (1.0 / eps).sqrt() / (opts.nx as f64 + opts.ny as f64);
        t.rows.push(vec![
            Cell::Num(*eps),
            Cell::Num(eps.log10()),
            Cell::Num(res.max_dt().log10()),
            Cell::Num(nap.max_dt().log10()),
            Cell::Num(analytic.log10()),
        ]);
    }
    Ok(vec![t])
}

fn cpu_table(opts: &TableOptions) -> Result<Vec<Table>, HarnessError> {
    // Sequential on purpose: the timings need the CPU to themselves.
    let mut t = Table::new(
        "cpu_table",
        "Ratio of the CPU time, resolved conventional over non-resolved AP",
        &["epsilon", "t", "conventional_resolved_s", "nap_s", "ratio", "conventional_steps", "nap_steps"],
    );
    for (eps, tf) in SWEEP {
        let conv = run(&base(opts, SchemeKind::Conventional, SpeedMode::Resolved, eps, tf))?;
        let mut nap = run(&base(opts, SchemeKind::Ap, SpeedMode::NonResolved, eps, tf))?;
        for _ in 1..opts.cpu_repeats.max(1) {
            let again = run(&nap.config)?;
            if again.wall_seconds < nap.wall_seconds {
                nap = again;
            }
        }
        t.rows.push(vec![
            Cell::Num(eps),
            Cell::Num(tf),
            Cell::Num(conv.wall_seconds),
            Cell::Num(nap.wall_seconds),
            Cell::Num(conv.wall_seconds / nap.wall_seconds),
            Cell::Int(conv.steps),
            Cell::Int(nap.steps),
        ]);
    }
    Ok(vec![t])
}

fn eps1_compare(opts: &TableOptions) -> Result<Vec<Table>, HarnessError> {
    let reports = run_all(vec![
        base(opts, SchemeKind::Ap, SpeedMode::Resolved, 1.0, 1.0),
        base(opts, SchemeKind::Conventional, SpeedMode::Resolved, 1.0, 1.0),
    ])?;
    let mut t = Table::new("eps1_compare", "AP and conventional resolved schemes at epsilon = 1", &ERROR_HEADERS);
    t.rows = reports.iter().map(error_row).collect();
    let mut d = Table::new("eps1_difference", "Largest field-wise relative difference between the two schemes", &[
        "epsilon",
        "t",
        "max_rel_diff_pct",
    ]);
    d.rows.push(vec![
        Cell::Num(1.0),
        Cell::Num(1.0),
        Cell::Num(max_relative_difference_pct(&reports[0].final_state, &reports[1].final_state)),
    ]);
    Ok(vec![t, d])
}

fn unprepared(opts: &TableOptions) -> Result<Vec<Table>, HarnessError> {
    let eps_prime = 1e-2;
    let configs = [SpeedMode::NonResolved, SpeedMode::Resolved]
        .into_iter()
        .map(|mode| RunConfig {
            case: CaseKind::Unprepared,
            epsilon_prime: eps_prime,
            ..base(opts, SchemeKind::Ap, mode, 1e-6, 0.1)
        })
        .collect();
    let reports = run_all(configs)?;
    let mut t = Table::new(
        "unprepared",
        "Differences to the drift-fluid limit with unprepared boundary data (epsilon' = 1e-2)",
        &ERROR_HEADERS,
    );
    t.rows = reports.iter().map(error_row).collect();
    Ok(vec![t])
}

/// Runs a preset and returns its tables.
pub fn reproduce_tables(preset: Preset, opts: &TableOptions) -> Result<Vec<Table>, HarnessError> {
    match preset {
        Preset::ErrorsResolved => error_tables(opts, SpeedMode::Resolved, "errors_resolved"),
        Preset::ErrorsNonresolved => error_tables(opts, SpeedMode::NonResolved, "errors_nonresolved"),
        Preset::DtTable => dt_table(opts),
        Preset::CpuTable => cpu_table(opts),
        Preset::Eps1Compare => eps1_compare(opts),
        Preset::Unprepared => unprepared(opts),
    }
}

/// Writes `<name>.csv` and `<name>.md` for each table.
pub fn write_tables(tables: &[Table], dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in tables {
        std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv())?;
        std::fs::write(dir.join(format!("{}.md", t.name)), t.to_markdown())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.as_str().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!("nope".parse::<Preset>(), Err(HarnessError::UnknownPreset(_))));
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new("x", "Title", &["a", "b", "c"]);
        t.rows.push(vec![Cell::Num(0.5), Cell::Int(3), Cell::Text("ok".into())]);
        assert_eq!(t.to_csv(), "a,b,c\n5.0000000000000000e-1,3,ok\n");
        assert!(t.to_markdown().contains("| 5.000e-1 | 3 | ok |"));
        assert_eq!(t.column("c"), Some(2));
    }

    #[test]
    fn coarse_dt_table() {
        let opts = TableOptions { nx: 10, ny: 10, dt_probe_steps: 3, ..Default::default() };
        let tables = reproduce_tables(Preset::DtTable, &opts).unwrap();
        let t = &tables[0];
        assert_eq!(t.rows.len(), 3);
        let (res, an) = (t.column("log10_dt_ap_resolved").unwrap(), t.column("analytic_log10_dt_resolved").unwrap());
        for row in &t.rows {
            let (a, b) = (row[res].as_f64().unwrap(), row[an].as_f64().unwrap());
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }
}

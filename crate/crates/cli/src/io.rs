//! Input parsing and output writing.

use std::fs;
use std::path::{Path, PathBuf};

use extshap_core::{
    CounterexampleReport, Dataset, DiscreteDistribution, Grid, ProblemFile, TabularFunction,
};
use serde::Serialize;

use crate::CliError;

/// Read a dataset: header row, then one numeric row per sample.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|_| {
                    CliError::Input(format!("{}: line {line}, column {}: not a number: {field:?}", path.display(), col + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Dataset::new(rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let header: Vec<String> = (0..data.d()).map(|j| format!("x{j}")).collect();
    let rows = data.rows().iter().map(|r| r.iter().map(|v| num(*v)).collect()).collect();
    write_csv(path, &header, rows)
}

/// Shortest decimal that parses back to the same `f64`; exponent form for
/// very small or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn write_csv(path: &Path, header: &[String], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Where a function comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Constant(f64),
    /// Sum of coordinates.
    Additive,
    /// Product of coordinates.
    Product,
    /// 1 on the cell with every coordinate at its largest grid value.
    Indicator,
    /// A problem file with `values`, or a counterexample report.
    File(PathBuf),
}

impl std::str::FromStr for FunctionSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "constant" => FunctionSpec::Constant(1.0),
            "additive" => FunctionSpec::Additive,
            "product" => FunctionSpec::Product,
            "indicator" => FunctionSpec::Indicator,
            _ => match s.strip_prefix("constant:") {
                Some(c) => FunctionSpec::Constant(c.parse().map_err(|_| format!("bad constant {c:?}"))?),
                None => FunctionSpec::File(PathBuf::from(s)),
            },
        })
    }
}

impl FunctionSpec {
    pub fn builtin(&self, grid: &Grid) -> Option<TabularFunction> {
        Some(match self {
            FunctionSpec::Constant(c) => TabularFunction::constant(grid.clone(), *c),
            FunctionSpec::Additive => TabularFunction::from_fn(grid.clone(), |x| x.iter().sum()),
            FunctionSpec::Product => TabularFunction::from_fn(grid.clone(), |x| x.iter().product()),
            FunctionSpec::Indicator => {
                let top: Vec<f64> = grid.features().iter().map(|v| v[v.len() - 1]).collect();
                TabularFunction::from_fn(grid.clone(), move |x| if x == top.as_slice() { 1.0 } else { 0.0 })
            }
            FunctionSpec::File(_) => return None,
        })
    }
}

/// A function file, with its distribution when it carries one.
pub struct LoadedFunction {
    pub f: TabularFunction,
    pub dist: Option<DiscreteDistribution>,
}

pub fn load_function_file(path: &Path) -> Result<LoadedFunction, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bad = |e: extshap_core::Error| CliError::Input(format!("{}: {e}", path.display()));
    if value.get("problem").is_some() {
        let report: CounterexampleReport =
            serde_json::from_value(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        return Ok(LoadedFunction { f: report.function().map_err(bad)?, dist: Some(report.distribution().map_err(bad)?) });
    }
    let problem: ProblemFile =
        serde_json::from_value(value).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let f = problem
        .function()
        .map_err(bad)?
        .ok_or_else(|| CliError::Input(format!("{}: no \"values\" field", path.display())))?;
    Ok(LoadedFunction { f, dist: problem.distribution().map_err(bad)? })
}

/// One row per support cell, repeated `copies` times. Exact only when the
/// distribution is uniform on its support.
pub fn dataset_from_uniform(dist: &DiscreteDistribution, copies: usize) -> Result<Dataset, CliError> {
    let support = dist.support();
    let first = support[0].1;
    if support.iter().any(|&(_, m)| (m - first).abs() > 1e-12) {
        return Err(CliError::Input(
            "the distribution is not uniform on its support; pass --data explicitly".into(),
        ));
    }
    let cells: Vec<usize> =
        (0..copies.max(1)).flat_map(|_| support.iter().map(|&(c, _)| c)).collect();
    Dataset::from_cells(dist.grid(), &cells).map_err(CliError::from)
}

/// Parse `d1xd2x...`.
pub fn parse_grid(spec: &str) -> Result<Vec<usize>, String> {
    spec.split('x')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad grid size {s:?} in {spec:?}")))
        .collect()
}

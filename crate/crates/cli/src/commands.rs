use std::path::Path;

use extshap_core::kernelshap::{aggregate_kernelshap_all, kernelshap_rows};
use extshap_core::verify::{run_verify, VerifyConfig, CHECKS};
use extshap_core::{
    aggregate_shap, empirical_distribution, eta_estimate, find_counterexample_for, is_determined,
    reconstruct_determined, ring_support, scramble_columns, shap_field, CounterexampleOptions, CounterexampleReport,
    Dataset, DiscreteDistribution, FeatureSubset, Grid, KernelShapConfig, TabularFunction,
};
use serde::Serialize;

use crate::io::{
    dataset_from_uniform, flag, load_function_file, num, parse_grid, read_dataset, read_text, write_csv,
    write_dataset, write_json, FunctionSpec,
};
use crate::{CliError, Common, Format, FunctionInput, KernelArgs, Mode};

struct Inputs {
    f: TabularFunction,
    dist: DiscreteDistribution,
    data: Option<Dataset>,
}

fn resolve(input: &FunctionInput) -> Result<Inputs, CliError> {
    let data = input.data.as_deref().map(read_dataset).transpose()?;
    match &input.function {
        FunctionSpec::File(path) => {
            let loaded = load_function_file(path)?;
            let dist = match (&data, loaded.dist) {
                (Some(data), _) => extshap_core::model::empirical_on_grid(loaded.f.grid(), data)
                    .map_err(|e| CliError::Input(format!("dataset does not fit the function's grid: {e}")))?,
                (None, Some(dist)) => dist,
                (None, None) => {
                    return Err(CliError::Input(format!(
                        "{} has no distribution; pass --data",
                        path.display()
                    )))
                }
            };
            Ok(Inputs { f: loaded.f, dist, data })
        }
        spec => {
            let data = data.ok_or_else(|| CliError::Input("built-in functions need --data".into()))?;
            let (grid, dist) = empirical_distribution(&data)?;
            let f = spec.builtin(&grid).expect("built-in");
            Ok(Inputs { f, dist, data: Some(data) })
        }
    }
}

fn background(inputs: &Inputs, copies: usize) -> Result<Dataset, CliError> {
    match &inputs.data {
        Some(d) => Ok(d.clone()),
        None => dataset_from_uniform(&inputs.dist, copies),
    }
}

fn kernel_config(kernel: &KernelArgs, seed: u64) -> KernelShapConfig {
    let mut cfg = match kernel.mode {
        Mode::Full => KernelShapConfig::full(),
        Mode::Sampled => KernelShapConfig::sampled(kernel.samples, seed),
    };
    cfg.center_f = kernel.center;
    cfg
}

fn check_feature(grid: &Grid, feature: usize) -> Result<(), CliError> {
    if feature >= grid.d() {
        return Err(CliError::Input(format!("--feature {feature} out of range for d = {}", grid.d())));
    }
    Ok(())
}

fn coord_header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[derive(Serialize)]
struct ShapRow {
    cell: usize,
    point: Vec<f64>,
    mass: f64,
    in_support: bool,
    in_extended: bool,
    phi: Vec<f64>,
    phi_star: Vec<f64>,
}

#[derive(Serialize)]
struct FeatureSummary {
    feature: usize,
    /// Mean |phi_i(mu)| over mu.
    aggregate_mu: f64,
    /// Mean |phi_i(mu)| over the product of marginals.
    aggregate_mu_on_extended: f64,
    /// Mean |phi_i(mu*)| over mu*.
    aggregate_star: f64,
    /// The function ignores this feature on the extended support.
    determined_without: bool,
}

#[derive(Serialize)]
struct ShapSummary {
    d: usize,
    cells: usize,
    support_cells: usize,
    extended_cells: usize,
    features: Vec<FeatureSummary>,
}

pub fn shap(common: &Common, input: &FunctionInput) -> Result<(), CliError> {
    let Inputs { f, dist, .. } = resolve(input)?;
    let grid = dist.grid().clone();
    let d = grid.d();
    let star = dist.extended();
    let support = dist.support_mask(0.0);
    let extended = star.support_mask(0.0);
    let fields: Vec<Vec<f64>> = (0..d).map(|i| shap_field(&dist, &f, i)).collect::<Result<_, _>>()?;
    let fields_star: Vec<Vec<f64>> = (0..d).map(|i| shap_field(&star, &f, i)).collect::<Result<_, _>>()?;

    let rows: Vec<ShapRow> = (0..grid.num_cells())
        .map(|c| ShapRow {
            cell: c,
            point: grid.point(c),
            mass: dist.mass()[c],
            in_support: support[c],
            in_extended: extended[c],
            phi: fields.iter().map(|fi| fi[c]).collect(),
            phi_star: fields_star.iter().map(|fi| fi[c]).collect(),
        })
        .collect();
    match common.format {
        Format::Json => write_json(&common.out_dir.join("shap.json"), &rows)?,
        Format::Csv => {
            let mut header = vec!["cell".to_string()];
            header.extend(coord_header(d));
            header.extend(["mass", "in_support", "in_extended"].map(String::from));
            header.extend((0..d).map(|i| format!("phi_{i}")));
            header.extend((0..d).map(|i| format!("phi_star_{i}")));
            let body = rows
                .iter()
                .map(|r| {
                    let mut line = vec![r.cell.to_string()];
                    line.extend(r.point.iter().map(|v| num(*v)));
                    line.extend([num(r.mass), flag(r.in_support), flag(r.in_extended)]);
                    line.extend(r.phi.iter().chain(&r.phi_star).map(|v| num(*v)));
                    line
                })
                .collect();
            write_csv(&common.out_dir.join("shap.csv"), &header, body)?;
        }
    }

    let features = (0..d)
        .map(|i| {
            Ok(FeatureSummary {
                feature: i,
                aggregate_mu: aggregate_shap(&dist, &dist, &f, i)?,
                aggregate_mu_on_extended: aggregate_shap(&star, &dist, &f, i)?,
                aggregate_star: aggregate_shap(&star, &star, &f, i)?,
                determined_without: is_determined(&f, FeatureSubset::full(d).without(i), &extended, common.tol)?,
            })
        })
        .collect::<Result<Vec<_>, extshap_core::Error>>()?;
    let summary = ShapSummary {
        d,
        cells: grid.num_cells(),
        support_cells: support.iter().filter(|&&b| b).count(),
        extended_cells: extended.iter().filter(|&&b| b).count(),
        features,
    };
    write_json(&common.out_dir.join("shap_summary.json"), &summary)?;
    for s in &summary.features {
        println!(
            "feature {}: aggregate over data {:.6e}, over extended support {:.6e}",
            s.feature, s.aggregate_mu, s.aggregate_star
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct KernelRow {
    row: usize,
    point: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct KernelSummary {
    n: usize,
    d: usize,
    mode: &'static str,
    samples: Option<usize>,
    seed: u64,
    aggregate: Vec<f64>,
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Full => "full",
        Mode::Sampled => "sampled",
    }
}

pub fn kshap(common: &Common, input: &FunctionInput, kernel: &KernelArgs) -> Result<(), CliError> {
    let inputs = resolve(input)?;
    let data = background(&inputs, input.copies)?;
    let cfg = kernel_config(kernel, common.seed);
    let reports = kernelshap_rows(&data, &inputs.f, &cfg)?;
    let d = inputs.f.grid().d();
    let rows: Vec<KernelRow> = reports
        .iter()
        .enumerate()
        .map(|(j, r)| KernelRow { row: j, point: data.rows()[j].clone(), values: r.per_feature.clone() })
        .collect();
    match common.format {
        Format::Json => write_json(&common.out_dir.join("kshap.json"), &rows)?,
        Format::Csv => {
            let mut header = vec!["row".to_string()];
            header.extend(coord_header(d));
            header.extend((0..d).map(|i| format!("k_{i}")));
            let body = rows
                .iter()
                .map(|r| {
                    let mut line = vec![r.row.to_string()];
                    line.extend(r.point.iter().chain(&r.values).map(|v| num(*v)));
                    line
                })
                .collect();
            write_csv(&common.out_dir.join("kshap.csv"), &header, body)?;
        }
    }
    let n = rows.len() as f64;
    let aggregate = (0..d).map(|i| rows.iter().map(|r| r.values[i].abs()).sum::<f64>() / n).collect();
    let summary = KernelSummary {
        n: rows.len(),
        d,
        mode: mode_name(kernel.mode),
        samples: (kernel.mode == Mode::Sampled).then_some(kernel.samples),
        seed: common.seed,
        aggregate,
    };
    write_json(&common.out_dir.join("kshap_summary.json"), &summary)?;
    println!("aggregate KernelSHAP: {:?}", summary.aggregate);
    Ok(())
}

#[derive(Serialize)]
struct Certificate {
    /// `int (f - g)^2 dmu*` for the feature-free reconstruction `g`.
    distance_sq: f64,
    /// `d^2 (scrambled aggregate + eta)`.
    bound: f64,
    holds: bool,
    /// Exact aggregate SHAP under the product of the data marginals.
    aggregate_shap_star: f64,
}

#[derive(Serialize)]
struct SoundAggregateOutput {
    feature: usize,
    n: usize,
    d: usize,
    mode: &'static str,
    seed: u64,
    /// Aggregate KernelSHAP per feature on the scrambled data.
    scrambled_aggregate: Vec<f64>,
    /// The same on the original data, for comparison.
    unscrambled_aggregate: Vec<f64>,
    eta: f64,
    certificate: Certificate,
}

pub fn sound_aggregate(common: &Common, input: &FunctionInput, kernel: &KernelArgs, feature: usize) -> Result<(), CliError> {
    let inputs = resolve(input)?;
    let grid = inputs.f.grid().clone();
    check_feature(&grid, feature)?;
    let data = background(&inputs, input.copies)?;
    let cfg = kernel_config(kernel, common.seed);
    let scrambled = scramble_columns(&data, common.seed);
    write_dataset(&common.out_dir.join("scrambled.csv"), &scrambled)?;

    let scrambled_aggregate = aggregate_kernelshap_all(&scrambled, &inputs.f, &cfg)?;
    let unscrambled_aggregate = aggregate_kernelshap_all(&data, &inputs.f, &cfg)?;
    let star = extshap_core::model::empirical_on_grid(&grid, &data)?.extended();
    let eta = eta_estimate(&scrambled, &star, &inputs.f, &cfg)?;
    let rec = reconstruct_determined(&star, &inputs.f, feature)?;
    let d = grid.d() as f64;
    let bound = d * d * (scrambled_aggregate[feature] + eta);
    let holds = rec.distance_sq <= bound + 1e-9;
    let out = SoundAggregateOutput {
        feature,
        n: data.n(),
        d: grid.d(),
        mode: mode_name(kernel.mode),
        seed: common.seed,
        scrambled_aggregate,
        unscrambled_aggregate,
        eta,
        certificate: Certificate { distance_sq: rec.distance_sq, bound, holds, aggregate_shap_star: rec.aggregate_shap },
    };
    write_json(&common.out_dir.join("sound_aggregate.json"), &out)?;
    println!(
        "feature {feature}: scrambled aggregate {:.6e}, unscrambled {:.6e}, eta {:.3e}, certificate {}",
        out.scrambled_aggregate[feature],
        out.unscrambled_aggregate[feature],
        eta,
        if holds { "holds" } else { "FAILS" }
    );
    if !holds {
        return Err(CliError::Check(format!("reconstruction distance {} exceeds bound {bound}", rec.distance_sq)));
    }
    Ok(())
}

fn parse_mask(spec: &str, sizes: &[usize]) -> Result<Vec<bool>, CliError> {
    if let Some(rest) = spec.strip_prefix("ring:") {
        if sizes.len() != 2 {
            return Err(CliError::Input("ring masks need a two-dimensional grid".into()));
        }
        let radii: Vec<f64> = rest
            .split(':')
            .map(|s| match s {
                "inf" => Ok(f64::INFINITY),
                s => s.parse::<f64>().map_err(|_| CliError::Input(format!("bad radius {s:?}"))),
            })
            .collect::<Result<_, _>>()?;
        if radii.len() != 2 {
            return Err(CliError::Input(format!("expected ring:r_inner:r_outer, got {spec:?}")));
        }
        return ring_support(sizes[0], sizes[1], radii[0], radii[1]).map_err(|e| CliError::Input(e.to_string()));
    }
    let path = Path::new(spec);
    let mask: Vec<bool> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Input(format!("{}: expected a JSON array of booleans: {e}", path.display())))?;
    let cells: usize = sizes.iter().product();
    if mask.len() != cells {
        return Err(CliError::Input(format!("mask has {} entries, grid has {cells} cells", mask.len())));
    }
    Ok(mask)
}

#[derive(Serialize)]
struct CounterexampleOutput {
    found: bool,
    feature: usize,
    full_extended: bool,
    pairs_tried: usize,
    best_objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<CounterexampleReport>,
}

pub fn counterexample(common: &Common, grid: &str, mask: &str, feature: usize, full_extended: bool) -> Result<(), CliError> {
    let sizes = parse_grid(grid).map_err(CliError::Input)?;
    let grid = Grid::integer(&sizes).map_err(|e| CliError::Input(e.to_string()))?;
    check_feature(&grid, feature)?;
    let mask = parse_mask(mask, &sizes)?;
    let dist = DiscreteDistribution::uniform_on(grid.clone(), &mask).map_err(|e| CliError::Input(e.to_string()))?;
    let opts = CounterexampleOptions { full_extended, support_tol: common.tol, ..Default::default() };
    let search = find_counterexample_for(&dist, feature, &opts)?;
    let out = CounterexampleOutput {
        found: search.report.is_some(),
        feature,
        full_extended,
        pairs_tried: search.pairs_tried,
        best_objective: search.best_objective,
        report: search.report.clone(),
    };
    match &search.report {
        Some(report) => {
            write_json(&common.out_dir.join("counterexample.json"), report)?;
            write_grid_table(&common.out_dir.join("counterexample_grid.csv"), &dist, &report.function()?, feature)?;
            println!(
                "counterexample for feature {feature}: pair {:?}, f(a) - f(b) = {:.6}, max |phi| on support {:.3e}, on extended support {:.3e}",
                report.pair, report.objective_value, report.max_abs_shap_on_support, report.max_abs_shap_on_extended
            );
        }
        None => println!(
            "no counterexample for feature {feature} after {} pairs (best objective {:.3e})",
            search.pairs_tried, search.best_objective
        ),
    }
    write_json(&common.out_dir.join("counterexample_search.json"), &out)
}

/// Long-format table: one row per cell with coordinates, masks, `f`, and
/// SHAP of `feature` under the data distribution and under the product of
/// its marginals.
fn write_grid_table(path: &Path, dist: &DiscreteDistribution, f: &TabularFunction, feature: usize) -> Result<(), CliError> {
    let grid = dist.grid();
    let star = dist.extended();
    let support = dist.support_mask(0.0);
    let extended = star.support_mask(0.0);
    let phi = shap_field(dist, f, feature)?;
    let phi_star = shap_field(&star, f, feature)?;
    let mut header = vec!["cell".to_string()];
    header.extend(coord_header(grid.d()));
    header.extend(["mass", "in_support", "in_extended", "f", "phi", "phi_star"].map(String::from));
    let rows = (0..grid.num_cells())
        .map(|c| {
            let mut line = vec![c.to_string()];
            line.extend(grid.point(c).iter().map(|v| num(*v)));
            line.extend([
                num(dist.mass()[c]),
                flag(support[c]),
                flag(extended[c]),
                num(f.at(c)),
                num(phi[c]),
                num(phi_star[c]),
            ]);
            line
        })
        .collect();
    write_csv(path, &header, rows)
}

pub fn verify(common: &Common, checks: Vec<String>, d: Option<usize>, inject_fault: bool) -> Result<(), CliError> {
    for c in &checks {
        if !CHECKS.contains(&c.as_str()) {
            return Err(CliError::Input(format!("unknown check {c:?}; known: {}", CHECKS.join(", "))));
        }
    }
    let cfg = VerifyConfig {
        seed: common.seed,
        d,
        checks: (!checks.is_empty()).then_some(checks),
        inject_fault,
    };
    let report = run_verify(&cfg).map_err(|e| CliError::Input(e.to_string()))?;
    write_json(&common.out_dir.join("verify.json"), &report)?;
    for c in &report.checks {
        println!(
            "{} {:<22} instances={:<4} worst={:.3e} tol={:.0e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.instances,
            c.worst_residual,
            c.tolerance
        );
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} (seeds {:?})", c.name, c.failing_seeds))
            .collect();
        Err(CliError::Check(failed.join(", ")))
    }
}

pub fn export_grid(common: &Common, input: &FunctionInput, feature: usize) -> Result<(), CliError> {
    let inputs = resolve(input)?;
    check_feature(inputs.dist.grid(), feature)?;
    write_grid_table(&common.out_dir.join("grid.csv"), &inputs.dist, &inputs.f, feature)?;
    let data = background(&inputs, input.copies)?;
    write_dataset(&common.out_dir.join("support_rows.csv"), &data)
}

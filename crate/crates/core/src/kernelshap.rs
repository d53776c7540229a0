//! KernelSHAP: the constrained weighted regression over feature subsets, in a
//! sampled form, an exact-enumeration form over a background dataset, and
//! the distributional limit object. Also column scrambling, aggregate
//! KernelSHAP, the empirical-vs-limit error term, and the expansion of the
//! limit operator in value operators.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ValueFunctions;
use crate::model::{empirical_on_grid, Dataset, DiscreteDistribution, FeatureSubset, TabularFunction};
use crate::operators::value_operators;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShapMode {
    /// Draw `num_subset_samples` subsets from the Shapley kernel, each paired
    /// with one background row.
    Sampled,
    /// Exact kernel expectation and an average over every background row.
    FullEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelShapConfig {
    pub mode: KernelShapMode,
    pub num_subset_samples: usize,
    pub rng_seed: u64,
    /// Subtract the background mean from `f` first. KernelSHAP values do not
    /// change; only the rounding does.
    pub center_f: bool,
}

impl KernelShapConfig {
    pub fn full() -> Self {
        Self { mode: KernelShapMode::FullEnumeration, num_subset_samples: 0, rng_seed: 0, center_f: true }
    }

    pub fn sampled(num_subset_samples: usize, rng_seed: u64) -> Self {
        Self { mode: KernelShapMode::Sampled, num_subset_samples, rng_seed, center_f: false }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if d < 2 {
            return Err(Error::InvalidArgument(
                "KernelSHAP needs d >= 2: the Shapley kernel vanishes on every subset when d = 1".into(),
            ));
        }
        if self.mode == KernelShapMode::Sampled && self.num_subset_samples < d {
            return Err(Error::InvalidArgument(format!(
                "sampled mode needs at least d = {d} subset samples, got {}",
                self.num_subset_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelShapReport {
    pub per_feature: Vec<f64>,
    pub mode: KernelShapMode,
    /// The enforced total `f(x) - mean f`.
    pub target_sum: f64,
}

/// Shapley kernel over all `2^d` subsets (bitmask order), normalized; zero on
/// the empty and the full set.
pub fn pi_weights(d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::InvalidArgument("the Shapley kernel needs d >= 2".into()));
    }
    if d > crate::model::MAX_FEATURES {
        return Err(Error::TooManyFeatures { d, max: crate::model::MAX_FEATURES });
    }
    let binom = binomial_row(d);
    let raw: Vec<f64> = FeatureSubset::all(d)
        .map(|s| {
            let k = s.len();
            if k == 0 || k == d {
                0.0
            } else {
                (d - 1) as f64 / (binom[k] * k as f64 * (d - k) as f64)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// `M = E_{S~pi}[1_S 1_S^T]` by enumeration, with `M = p I + q J` read off
/// the result and the published closed form reported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct KernelMatrix {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub p: f64,
    pub q: f64,
    pub closed_form_p: f64,
    pub closed_form_q: f64,
}

pub fn m_matrix(d: usize) -> Result<KernelMatrix> {
    let pi = pi_weights(d)?;
    let mut matrix = DMatrix::zeros(d, d);
    for (mask, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = FeatureSubset(mask as u32);
        for a in s.iter() {
            for b in s.iter() {
                matrix[(a, b)] += w;
            }
        }
    }
    let q = matrix[(0, 1)];
    let p = matrix[(0, 0)] - q;
    let dd = d as f64;
    let num: f64 = (2..d).map(|k| (dd - 1.0) / (dd - k as f64)).sum();
    let den: f64 = (1..d).map(|k| 1.0 / (k as f64 * (dd - k as f64))).sum();
    let closed_form_q = num / den / (dd * (dd - 1.0));
    let closed_form_p = 0.5 - closed_form_q;
    Ok(KernelMatrix { matrix, p, q, closed_form_p, closed_form_q })
}

/// `M^-1 (b - 1 (1^T M^-1 b - total) / (1^T M^-1 1))`: the minimizer of the
/// weighted regression subject to the coefficients summing to `total`.
pub fn constrained_solution(m: &DMatrix<f64>, b: &DVector<f64>, total: f64) -> Result<DVector<f64>> {
    let d = m.nrows();
    let sv = m.clone().singular_values();
    if sv.min() <= 1e-12 * sv.max().max(f64::MIN_POSITIVE) {
        return Err(Error::Singular(
            "the subset design matrix is singular; draw more subset samples".into(),
        ));
    }
    let lu = m.clone().lu();
    let y = lu.solve(b).ok_or_else(|| Error::Singular("design matrix".into()))?;
    let ones = DVector::from_element(d, 1.0);
    let z = lu.solve(&ones).ok_or_else(|| Error::Singular("design matrix".into()))?;
    let scale = (y.sum() - total) / z.sum();
    Ok(y - z * scale)
}

/// The same solution for `M = p I + q J`, via
/// `M^-1 = I/p - q/(p (p + q d)) J`.
pub fn structured_solution(p: f64, q: f64, b: &DVector<f64>, total: f64) -> DVector<f64> {
    let d = b.len() as f64;
    let inv = |v: &DVector<f64>| v / p - DVector::from_element(v.len(), q * v.sum() / (p * (p + q * d)));
    let y = inv(b);
    let z = inv(&DVector::from_element(b.len(), 1.0));
    let scale = (y.sum() - total) / z.sum();
    y - z * scale
}

fn subset_sampler(pi: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pi.iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn draw_subset(cdf: &[f64], rng: &mut ChaCha8Rng) -> FeatureSubset {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
    FeatureSubset(idx as u32)
}

/// Per-row KernelSHAP over a background dataset that is also the set of
/// explained points.
struct KernelContext<'a> {
    f: TabularFunction,
    cells: Vec<usize>,
    mean: f64,
    cfg: KernelShapConfig,
    pi: Vec<f64>,
    kernel: KernelMatrix,
    empirical: Option<DiscreteDistribution>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a> KernelContext<'a> {
    fn new(data: &Dataset, f: &TabularFunction, cfg: KernelShapConfig) -> Result<Self> {
        let d = f.grid().d();
        cfg.validate(d)?;
        let cells = data.cells_on(f.grid())?;
        let raw_mean = cells.iter().map(|&c| f.at(c)).sum::<f64>() / cells.len() as f64;
        let (f, mean) = if cfg.center_f { (f.map(|v| v - raw_mean), 0.0) } else { (f.clone(), raw_mean) };
        let empirical = match cfg.mode {
            KernelShapMode::FullEnumeration => Some(empirical_on_grid(f.grid(), data)?),
            KernelShapMode::Sampled => None,
        };
        Ok(Self {
            cells,
            mean,
            cfg,
            pi: pi_weights(d)?,
            kernel: m_matrix(d)?,
            empirical,
            f,
            _marker: std::marker::PhantomData,
        })
    }

    fn point(&self, x: usize, stream: u64) -> Result<KernelShapReport> {
        let grid = self.f.grid();
        grid.check_cell(x)?;
        let d = grid.d();
        let target_sum = self.f.at(x) - self.mean;
        let (m, b) = match &self.empirical {
            Some(emp) => {
                let vf = ValueFunctions::new(emp, &self.f)?;
                let mut b = DVector::zeros(d);
                for (mask, &w) in self.pi.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let s = FeatureSubset(mask as u32);
                    let target = vf.value(x, s) - self.mean;
                    for j in s.iter() {
                        b[j] += w * target;
                    }
                }
                (self.kernel.matrix.clone(), b)
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed);
                rng.set_stream(stream);
                let cdf = subset_sampler(&self.pi);
                let n = self.cfg.num_subset_samples;
                let mut m = DMatrix::zeros(d, d);
                let mut b = DVector::zeros(d);
                for j in 0..n {
                    let s = draw_subset(&cdf, &mut rng);
                    let background = self.cells[j % self.cells.len()];
                    let target = self.f.at(grid.splice(x, background, s)) - self.mean;
                    for a in s.iter() {
                        b[a] += target;
                        for c in s.iter() {
                            m[(a, c)] += 1.0;
                        }
                    }
                }
                (m / n as f64, b / n as f64)
            }
        };
        let k = constrained_solution(&m, &b, target_sum)?;
        Ok(KernelShapReport { per_feature: k.iter().copied().collect(), mode: self.cfg.mode, target_sum })
    }

    fn rows(&self) -> Result<Vec<KernelShapReport>> {
        let mut cache: std::collections::HashMap<usize, KernelShapReport> = std::collections::HashMap::new();
        self.cells
            .iter()
            .enumerate()
            .map(|(j, &x)| match self.cfg.mode {
                // Exact mode depends on the cell only.
                KernelShapMode::FullEnumeration => {
                    if let Some(r) = cache.get(&x) {
                        return Ok(r.clone());
                    }
                    let r = self.point(x, 0)?;
                    cache.insert(x, r.clone());
                    Ok(r)
                }
                KernelShapMode::Sampled => self.point(x, j as u64),
            })
            .collect()
    }
}

/// KernelSHAP values at grid cell `x` with `data` as background.
pub fn kernelshap_point(
    data: &Dataset,
    f: &TabularFunction,
    x: usize,
    cfg: &KernelShapConfig,
) -> Result<KernelShapReport> {
    KernelContext::new(data, f, *cfg)?.point(x, x as u64)
}

/// KernelSHAP values at every row of `data`, with `data` as background.
pub fn kernelshap_rows(data: &Dataset, f: &TabularFunction, cfg: &KernelShapConfig) -> Result<Vec<KernelShapReport>> {
    KernelContext::new(data, f, *cfg)?.rows()
}

/// The limit object: the same regression with exact kernel expectations and
/// exact value functions under `dist`.
pub fn kernelshap_limit(dist: &DiscreteDistribution, f: &TabularFunction, x: usize) -> Result<KernelShapReport> {
    let d = dist.d();
    if d < 2 {
        return Err(Error::InvalidArgument("KernelSHAP needs d >= 2".into()));
    }
    dist.grid().check_cell(x)?;
    let vf = ValueFunctions::new(dist, f)?;
    let pi = pi_weights(d)?;
    let kernel = m_matrix(d)?;
    let base = vf.value(x, FeatureSubset::EMPTY);
    let mut b = DVector::zeros(d);
    for (mask, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = FeatureSubset(mask as u32);
        let target = vf.value(x, s) - base;
        for j in s.iter() {
            b[j] += w * target;
        }
    }
    let target_sum = f.at(x) - base;
    let k = constrained_solution(&kernel.matrix, &b, target_sum)?;
    Ok(KernelShapReport { per_feature: k.iter().copied().collect(), mode: KernelShapMode::FullEnumeration, target_sum })
}

/// Independently permute every column (Fisher-Yates, one RNG stream per
/// column). Row `r` of the result takes column `j` from row `sigma_j(r)`.
pub fn scramble_columns(data: &Dataset, rng_seed: u64) -> Dataset {
    let n = data.n();
    let mut rows = vec![vec![0.0; data.d()]; n];
    for j in 0..data.d() {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(j as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for (r, &src) in perm.iter().enumerate() {
            rows[r][j] = data.rows()[src][j];
        }
    }
    Dataset::new(rows).expect("scrambling preserves shape")
}

/// Mean of `|K_i|` over the rows of `data`, each explained against `data`.
pub fn aggregate_kernelshap(data: &Dataset, f: &TabularFunction, i: usize, cfg: &KernelShapConfig) -> Result<f64> {
    f.grid().check_feature(i)?;
    let rows = kernelshap_rows(data, f, cfg)?;
    Ok(rows.iter().map(|r| r.per_feature[i].abs()).sum::<f64>() / rows.len() as f64)
}

/// Mean `|K_i|` per feature over the rows of `data`.
pub fn aggregate_kernelshap_all(data: &Dataset, f: &TabularFunction, cfg: &KernelShapConfig) -> Result<Vec<f64>> {
    let rows = kernelshap_rows(data, f, cfg)?;
    let d = f.grid().d();
    let n = rows.len() as f64;
    Ok((0..d).map(|i| rows.iter().map(|r| r.per_feature[i].abs()).sum::<f64>() / n).collect())
}

/// `E_{x ~ dist} |K_i(dist, f, x)|` per feature.
pub fn aggregate_kernelshap_limit(dist: &DiscreteDistribution, f: &TabularFunction) -> Result<Vec<f64>> {
    let d = dist.d();
    let mut out = vec![0.0; d];
    for (x, w) in dist.support() {
        let k = kernelshap_limit(dist, f, x)?;
        for i in 0..d {
            out[i] += w * k.per_feature[i].abs();
        }
    }
    Ok(out)
}

/// Largest per-feature gap between the empirical aggregate KernelSHAP on
/// `x_star` and the aggregate of the limit object under `dist_star`.
pub fn eta_estimate(
    x_star: &Dataset,
    dist_star: &DiscreteDistribution,
    f: &TabularFunction,
    cfg: &KernelShapConfig,
) -> Result<f64> {
    dist_star.require_product()?;
    if f.grid() != dist_star.grid() {
        return Err(Error::GridMismatch("distribution and function"));
    }
    let empirical = aggregate_kernelshap_all(x_star, f, cfg)?;
    let limit = aggregate_kernelshap_limit(dist_star, f)?;
    Ok(empirical.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct IotaReport {
    pub feature: usize,
    /// `iota_S` by bitmask.
    pub coefficients: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub iota_full: f64,
    /// Smallest `iota_S` over subsets containing the feature.
    pub min_iota_containing: f64,
    /// Worst gap between `sum_S iota_S v_S* f` and the limit object on the
    /// probe functions.
    pub max_reconstruction_error: f64,
    pub probes: usize,
}

pub const IOTA_TOL: f64 = 1e-9;
const IOTA_PROBES: usize = 20;

/// Coefficients `iota_S` with `K_i* = sum_S iota_S v_S*` on mean-zero
/// functions:
///
/// `iota_S = pi(S) (1(i in S)/p - q|S|/(p(p+dq)) - |S|/(d(p+dq))) + 1(S = [d])/d`.
pub fn iota_coefficients(d: usize, i: usize) -> Result<(Vec<f64>, KernelMatrix)> {
    if i >= d {
        return Err(Error::FeatureOutOfRange { index: i, d });
    }
    let pi = pi_weights(d)?;
    let kernel = m_matrix(d)?;
    let (p, q, dd) = (kernel.p, kernel.q, d as f64);
    let full = FeatureSubset::full(d);
    let coefficients = FeatureSubset::all(d)
        .map(|s| {
            let k = s.len() as f64;
            let own = if s.contains(i) { 1.0 / p } else { 0.0 };
            let mut c = pi[s.0 as usize] * (own - q * k / (p * (p + dd * q)) - k / (dd * (p + dd * q)));
            if s == full {
                c += 1.0 / dd;
            }
            c
        })
        .collect();
    Ok((coefficients, kernel))
}

/// Expand the KernelSHAP limit operator for feature `i` in value operators
/// and check the expansion against the limit object on seeded random
/// mean-zero probe functions.
pub fn iota_decomposition(dist_star: &DiscreteDistribution, i: usize) -> Result<IotaReport> {
    dist_star.require_product()?;
    let d = dist_star.d();
    dist_star.grid().check_feature(i)?;
    let (coefficients, kernel) = iota_coefficients(d, i)?;
    let ops = value_operators(dist_star);
    let basis = ops[0].basis.clone();
    let mut combined = DMatrix::zeros(basis.len(), basis.len());
    for (op, &c) in ops.iter().zip(&coefficients) {
        combined += &op.matrix * c;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x10_7A);
    let mut worst = 0.0f64;
    for _ in 0..IOTA_PROBES {
        let raw: Vec<f64> = (0..dist_star.grid().num_cells()).map(|_| rng.random::<f64>()).collect();
        let f = TabularFunction::new(dist_star.grid().clone(), raw)?;
        let mean = dist_star.expectation(&f)?;
        let f = f.map(|v| v - mean);
        let fv = DVector::from_iterator(basis.len(), basis.iter().map(|&c| f.at(c)));
        let expanded = &combined * fv;
        for (k, &x) in basis.iter().enumerate() {
            let limit = kernelshap_limit(dist_star, &f, x)?.per_feature[i];
            worst = worst.max((expanded[k] - limit).abs());
        }
    }
    if worst > IOTA_TOL {
        return Err(Error::ReconstructionMismatch { max_error: worst, tol: IOTA_TOL });
    }
    let full = FeatureSubset::full(d);
    let min_iota_containing = FeatureSubset::all(d)
        .filter(|s| s.contains(i))
        .map(|s| coefficients[s.0 as usize])
        .fold(f64::INFINITY, f64::min);
    Ok(IotaReport {
        feature: i,
        iota_full: coefficients[full.0 as usize],
        coefficients,
        p: kernel.p,
        q: kernel.q,
        min_iota_containing,
        max_reconstruction_error: worst,
        probes: IOTA_PROBES,
    })
}

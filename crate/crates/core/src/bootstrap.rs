//! Multiplier bootstrap: random weights, reweighted barycenters `Q_u`, the
//! statistic `√n·ρ(Q_u, Q_n)`, and the empirical-CDF toolkit used to compare
//! its distribution with others (Kolmogorov distance, quantiles, bands).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{barycenter, SampleSet, SolverConfig};
use crate::error::{BwError, Result};
use crate::geometry;
use crate::matrix::SymMatrix;
use crate::rng::{self, Purpose};

/// Quantile levels reported when none are requested.
pub const DEFAULT_LEVELS: [f64; 4] = [0.5, 0.9, 0.95, 0.99];

/// Distribution of the bootstrap multipliers `u_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// Exponential(1).
    Exp1,
    /// Poisson(1).
    Po1,
    /// `2·Bernoulli(1/2)`.
    Bern2,
    /// The same fixed list for every draw.
    Provided(Vec<f64>),
}

impl WeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Exp1 => "exp1",
            WeightScheme::Po1 => "po1",
            WeightScheme::Bern2 => "bern2",
            WeightScheme::Provided(_) => "provided",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = BwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" => Ok(WeightScheme::Exp1),
            "po1" => Ok(WeightScheme::Po1),
            "bern2" => Ok(WeightScheme::Bern2),
            other => Err(BwError::Config(format!(
                "unknown weight scheme `{other}` (expected exp1, po1 or bern2)"
            ))),
        }
    }
}

/// `n` i.i.d. multipliers from `rng`.
pub fn draw_weights_with<R: Rng + ?Sized>(scheme: &WeightScheme, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(BwError::Config("n must be at least 1".into()));
    }
    Ok(match scheme {
        WeightScheme::Exp1 => (0..n).map(|_| Exp1.sample(rng)).collect(),
        WeightScheme::Po1 => {
            let po = Poisson::new(1.0).expect("unit Poisson mean is valid");
            (0..n).map(|_| po.sample(rng)).collect()
        }
        WeightScheme::Bern2 => (0..n).map(|_| if rng.gen_bool(0.5) { 2.0 } else { 0.0 }).collect(),
        WeightScheme::Provided(w) => {
            if w.len() != n {
                return Err(BwError::shape(format!("{n} weights"), w.len()));
            }
            w.clone()
        }
    })
}

/// `n` multipliers from the weight stream of `seed`.
pub fn draw_weights(scheme: &WeightScheme, n: usize, seed: u64) -> Result<Vec<f64>> {
    draw_weights_with(scheme, n, &mut rng::stream(seed, Purpose::Weights, 0))
}

/// Right-continuous empirical distribution function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|x| x.is_nan()) {
            return Err(BwError::Domain("CDF points must not be NaN".into()));
        }
        points.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { points })
    }

    /// The empirical CDF of the pooled points, which equals the pointwise mean
    /// of the given CDFs when they all have the same size.
    pub fn pooled(cdfs: &[EmpiricalCdf]) -> Result<Self> {
        let Some(first) = cdfs.first() else {
            return Err(BwError::Domain("no CDFs to pool".into()));
        };
        if cdfs.iter().any(|c| c.len() != first.len()) {
            return Err(BwError::Domain("pooled CDFs must have equal sizes".into()));
        }
        EmpiricalCdf::new(cdfs.iter().flat_map(|c| c.points.iter().copied()).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `#{points ≤ x} / n`; zero for an empty CDF.
    pub fn eval(&self, x: f64) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.partition_point(|&p| p <= x) as f64 / self.points.len() as f64
    }
}

/// `sup_x |F(x) − G(x)|`, exact. Both functions are constant between merged
/// jump points, so scanning the jumps in order suffices.
pub fn ks_distance(f: &EmpiricalCdf, g: &EmpiricalCdf) -> Result<f64> {
    if f.is_empty() || g.is_empty() {
        return Err(BwError::Domain("KS distance needs non-empty CDFs".into()));
    }
    let (a, b) = (f.points(), g.points());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0_f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Order statistic number `ceil(level·n)` (1-based).
pub fn quantile(cdf: &EmpiricalCdf, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(BwError::Domain(format!("quantile level {level} outside (0, 1)")));
    }
    if cdf.is_empty() {
        return Err(BwError::Domain("quantile of an empty CDF".into()));
    }
    Ok(order_statistic(cdf.points(), level))
}

fn order_statistic(sorted: &[f64], level: f64) -> f64 {
    let k = (level * sorted.len() as f64).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

/// Pointwise summary of several CDFs at one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub lo: f64,
    pub mean: f64,
    pub hi: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Pointwise min, mean, max and 5%/95% quantiles of `cdfs` on `grid`.
pub fn confidence_bands(cdfs: &[EmpiricalCdf], grid: &[f64]) -> Result<Vec<BandPoint>> {
    if cdfs.len() < 2 {
        return Err(BwError::Domain("confidence bands need at least two CDFs".into()));
    }
    check_grid(grid)?;
    Ok(grid
        .iter()
        .map(|&x| {
            let mut vals: Vec<f64> = cdfs.iter().map(|c| c.eval(x)).collect();
            vals.sort_by(f64::total_cmp);
            BandPoint {
                x,
                lo: vals[0],
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                hi: vals[vals.len() - 1],
                q05: order_statistic(&vals, 0.05),
                q95: order_statistic(&vals, 0.95),
            }
        })
        .collect())
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(BwError::Config("grid values must be finite".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(BwError::Config("grid must be sorted ascending".into()));
    }
    Ok(())
}

/// `n` equally spaced points spanning `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// CSV table with header `x,lo,mean,hi`.
pub fn band_csv(rows: &[BandPoint]) -> String {
    let mut out = String::from("x,lo,mean,hi\n");
    for r in rows {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", r.x, r.lo, r.mean, r.hi));
    }
    out
}

/// A single CDF as a band table: one row per point with `lo = mean = hi = F(x)`.
pub fn cdf_csv(cdf: &EmpiricalCdf) -> String {
    let rows: Vec<BandPoint> = cdf
        .points()
        .iter()
        .map(|&x| {
            let v = cdf.eval(x);
            BandPoint {
                x,
                lo: v,
                mean: v,
                hi: v,
                q05: v,
                q95: v,
            }
        })
        .collect();
    band_csv(&rows)
}

/// Reads the `x` column of a table written by [`cdf_csv`] or [`band_csv`].
pub fn cdf_from_csv(text: &str) -> Result<EmpiricalCdf> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim().starts_with("x,") || h.trim() == "x" => {}
        _ => return Err(BwError::Config("CDF table must start with an `x,...` header".into())),
    }
    let points = lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .next()
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|e| BwError::Config(format!("CDF table row {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalCdf::new(points)
}

/// Distance `ρ` between barycenters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// `‖A − B‖_F`.
    Frobenius,
    /// `d_B(A, B)`.
    BuresWasserstein,
}

impl StatKind {
    pub fn distance(self, a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
        match self {
            StatKind::Frobenius => Ok(a.sub(b)?.frobenius_norm()),
            StatKind::BuresWasserstein => geometry::bw_distance(a, b),
        }
    }

    pub(crate) fn distance_raw(self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        match self {
            StatKind::Frobenius => (a - b).norm(),
            StatKind::BuresWasserstein => geometry::bw_distance_sq_raw(a, b).sqrt(),
        }
    }
}

impl FromStr for StatKind {
    type Err = BwError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bw" | "bures_wasserstein" => Ok(StatKind::BuresWasserstein),
            "frob" | "frobenius" => Ok(StatKind::Frobenius),
            other => Err(BwError::Config(format!(
                "unknown statistic `{other}` (expected bw or frob)"
            ))),
        }
    }
}

/// Bootstrap replicates `√n·ρ(Q_u, Q_n)` in replicate order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub stat_kind: StatKind,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub scheme: String,
    pub seed: u64,
    /// The `√n` factor applied to every replicate.
    pub scale: f64,
    pub replicates: Vec<f64>,
    /// Keyed by the level as written by `f64`'s `Display`.
    pub quantiles: BTreeMap<String, f64>,
    pub rejected_draws: usize,
    /// Replicates whose solver stopped at `max_iter`.
    pub unconverged: usize,
}

impl BootstrapReport {
    pub fn cdf(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(self.replicates.clone()).expect("replicates are finite")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BwError::Config(format!("bootstrap report: {e}")))
    }
}

struct Replicate {
    stat: f64,
    rejected: usize,
    converged: bool,
}

/// Runs `b` bootstrap replicates. Replicate `k` draws its weights from stream
/// `(seed, k)`; draws whose positive weights touch no positive definite matrix
/// are redrawn. More than `10·b` attempts in total is an error.
pub fn run_bootstrap(
    data: &SampleSet,
    q_n: &SymMatrix,
    b: usize,
    scheme: &WeightScheme,
    stat_kind: StatKind,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<BootstrapReport> {
    run_bootstrap_with_levels(data, q_n, b, scheme, stat_kind, cfg, seed, &DEFAULT_LEVELS)
}

#[allow(clippy::too_many_arguments)]
pub fn run_bootstrap_with_levels(
    data: &SampleSet,
    q_n: &SymMatrix,
    b: usize,
    scheme: &WeightScheme,
    stat_kind: StatKind,
    cfg: &SolverConfig,
    seed: u64,
    levels: &[f64],
) -> Result<BootstrapReport> {
    if b == 0 {
        return Err(BwError::Config("B must be at least 1".into()));
    }
    if q_n.dim() != data.dim() {
        return Err(BwError::shape(data.dim(), q_n.dim()));
    }
    q_n.require_pd("bootstrap centre")?;
    cfg.validate()?;
    for &l in levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(BwError::Domain(format!("quantile level {l} outside (0, 1)")));
        }
    }
    let n = data.len();
    let budget = 10 * b;
    let warm = cfg.warm_started(q_n.clone());
    let scale = (n as f64).sqrt();

    let reps: Vec<Replicate> = (0..b)
        .into_par_iter()
        .map(|k| -> Result<Replicate> {
            let mut rng = rng::stream(seed, Purpose::Weights, k as u64);
            let mut rejected = 0;
            loop {
                let u = draw_weights_with(scheme, n, &mut rng)?;
                let reweighted = match data.reweighted(u) {
                    Ok(set) => set,
                    Err(BwError::Weight(_)) | Err(BwError::Domain(_)) => {
                        rejected += 1;
                        if rejected >= budget {
                            return Err(BwError::DegenerateResample {
                                attempts: rejected,
                                wanted: b,
                            });
                        }
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let res = barycenter(&reweighted, &warm)?;
                let stat = scale * stat_kind.distance_raw(res.q.matrix(), q_n.matrix());
                return Ok(Replicate {
                    stat,
                    rejected,
                    converged: res.converged,
                });
            }
        })
        .collect::<Result<_>>()?;

    let rejected_draws: usize = reps.iter().map(|r| r.rejected).sum();
    if b + rejected_draws > budget {
        return Err(BwError::DegenerateResample {
            attempts: b + rejected_draws,
            wanted: b,
        });
    }
    let replicates: Vec<f64> = reps.iter().map(|r| r.stat).collect();
    let cdf = EmpiricalCdf::new(replicates.clone())?;
    let quantiles = levels
        .iter()
        .map(|&l| Ok((l.to_string(), quantile(&cdf, l)?)))
        .collect::<Result<_>>()?;
    Ok(BootstrapReport {
        stat_kind,
        n,
        b,
        scheme: scheme.name().to_string(),
        seed,
        scale,
        replicates,
        quantiles,
        rejected_draws,
        unconverged: reps.iter().filter(|r| !r.converged).count(),
    })
}

//! Sup-over-x error sweeps, log-log decay fits, the atom-floor study and the
//! partition-mass check.

use std::fmt;
use std::str::FromStr;

use crate::dist_zoo::{builtin, DistributionSpec};
use crate::edgeworth::{refined_approx, stone_approx, IntervalQuery};
use crate::error::{Error, Result};
use crate::inversion::{sandwich_bracket, InversionConfig};
use crate::oracles::{interval_prob_mc, ErrorKind, FftOracle, OracleEstimate};
use crate::par::map_range;

/// A point is flagged when its certificate exceeds this share of its error.
pub const FLAG_RATIO: f64 = 0.1;
/// A sweep aborts when more than this share of its points is flagged.
pub const MAX_FLAGGED_SHARE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleChoice {
    Fft,
    Mc,
    Inversion,
}

impl OracleChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleChoice::Fft => "fft",
            OracleChoice::Mc => "mc",
            OracleChoice::Inversion => "inversion",
        }
    }
}

impl FromStr for OracleChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fft" => Ok(OracleChoice::Fft),
            "mc" => Ok(OracleChoice::Mc),
            "inversion" => Ok(OracleChoice::Inversion),
            _ => Err(format!("expected one of fft, mc, inversion; got `{s}`")),
        }
    }
}

impl fmt::Display for OracleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxChoice {
    Stone,
    Refined,
}

impl ApproxChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ApproxChoice::Stone => "stone",
            ApproxChoice::Refined => "refined",
        }
    }

    /// Signed approximation of `P(S_n ∈ [x, x+Δ))`.
    pub fn evaluate(self, dist: &DistributionSpec, q: &IntervalQuery) -> f64 {
        match self {
            ApproxChoice::Stone => stone_approx(q),
            ApproxChoice::Refined => refined_approx(dist, q).total,
        }
    }
}

impl FromStr for ApproxChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stone" => Ok(ApproxChoice::Stone),
            "refined" => Ok(ApproxChoice::Refined),
            _ => Err(format!("expected stone or refined; got `{s}`")),
        }
    }
}

impl fmt::Display for ApproxChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub dist: String,
    pub n_list: Vec<u64>,
    pub delta: f64,
    /// Grid half-range in units of `√n`.
    pub grid_m: f64,
    /// Grid step in units of `√n`.
    pub grid_s: f64,
    pub oracle: OracleChoice,
    pub approx: ApproxChoice,
    pub seed: u64,
    /// FFT lattice spacing.
    pub h: f64,
    /// Monte Carlo sample count per point.
    pub samples: usize,
    /// Inversion truncation tolerance.
    pub tail_tol: f64,
}

impl SweepConfig {
    pub fn new(dist: &str, n_list: Vec<u64>, delta: f64) -> Self {
        SweepConfig {
            dist: dist.to_string(),
            n_list,
            delta,
            grid_m: 6.0,
            grid_s: 0.05,
            oracle: OracleChoice::Fft,
            approx: ApproxChoice::Refined,
            seed: 0,
            h: 1e-3,
            samples: 1_000_000,
            tail_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<DistributionSpec> {
        let dist = builtin(&self.dist)?;
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(Error::param("n_list", "needs positive entries"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_list", "must be strictly increasing"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param(
                "delta",
                format!("must be positive, got {}", self.delta),
            ));
        }
        if !(self.grid_m >= 4.0 && self.grid_m.is_finite()) {
            return Err(Error::param(
                "grid.m",
                format!("must be at least 4, got {}", self.grid_m),
            ));
        }
        if !(self.grid_s > 0.0 && self.grid_s <= self.grid_m) {
            return Err(Error::param(
                "grid.s",
                format!("must lie in (0, m], got {}", self.grid_s),
            ));
        }
        Ok(dist)
    }

    /// Points `k·s·√n` with `|k·s| ≤ m`.
    pub fn x_grid(&self, n: u64) -> Vec<f64> {
        let k_max = (self.grid_m / self.grid_s + 1e-9).floor() as i64;
        let root = (n as f64).sqrt();
        (-k_max..=k_max)
            .map(|k| k as f64 * self.grid_s * root)
            .collect()
    }
}

/// One grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointError {
    pub x: f64,
    pub approx_value: f64,
    pub oracle: OracleEstimate,
    pub abs_err_per_delta: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub n: u64,
    pub approx: ApproxChoice,
    pub points: Vec<PointError>,
    /// Index of the sup point in `points`.
    pub argmax: usize,
    pub flagged: usize,
}

impl SweepResult {
    pub fn sup(&self) -> f64 {
        self.points[self.argmax].abs_err_per_delta
    }

    pub fn sup_point(&self) -> &PointError {
        &self.points[self.argmax]
    }

    pub fn flagged_share(&self) -> f64 {
        self.flagged as f64 / self.points.len() as f64
    }
}

fn point_seed(seed: u64, n: u64, k: usize) -> u64 {
    seed ^ n.rotate_left(32) ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Oracle estimates on the sweep grid for one `n`, in grid order.
pub fn oracle_points(cfg: &SweepConfig, n: u64) -> Result<Vec<(f64, OracleEstimate)>> {
    let dist = cfg.validate()?;
    let xs = cfg.x_grid(n);
    let delta = cfg.delta;
    let results: Vec<Result<OracleEstimate>> = match cfg.oracle {
        OracleChoice::Fft => {
            let oracle = FftOracle::new(&dist, n, cfg.h)?;
            map_range(xs.len(), |k| Ok(oracle.estimate(xs[k], delta)))
        }
        OracleChoice::Mc => map_range(xs.len(), |k| {
            let q = IntervalQuery::new(n, xs[k], delta)?;
            interval_prob_mc(&dist, &q, cfg.samples, point_seed(cfg.seed, n, k))
        }),
        OracleChoice::Inversion => map_range(xs.len(), |k| {
            let q = IntervalQuery::new(n, xs[k], delta)?;
            let ic = InversionConfig::for_query(&q)
                .with_delta_smooth(delta / (n as f64 + 1.0))
                .with_tail_tol(cfg.tail_tol);
            let b = sandwich_bracket(&dist, &q, &ic)?;
            Ok(OracleEstimate::new(
                b.midpoint(),
                ErrorKind::Bracket,
                0.5 * b.width() + b.tol(),
            ))
        }),
    };
    results
        .into_iter()
        .zip(xs)
        .map(|(r, x)| r.map(|e| (x, e)))
        .collect()
}

fn advisory(cfg: &SweepConfig) -> String {
    match cfg.oracle {
        OracleChoice::Fft => format!("refine the lattice (h ≤ {:e}) or raise delta", cfg.h / 4.0),
        OracleChoice::Mc => format!(
            "raise samples above {} or switch to the fft oracle",
            cfg.samples
        ),
        OracleChoice::Inversion => "switch to the fft oracle or lower tail_tol".to_string(),
    }
}

/// Score an approximation against precomputed oracle points.
pub fn score_points(
    cfg: &SweepConfig,
    n: u64,
    approx: ApproxChoice,
    points: &[(f64, OracleEstimate)],
) -> Result<SweepResult> {
    let dist = cfg.validate()?;
    if points.is_empty() {
        return Err(Error::param("grid", "no grid points"));
    }
    let delta = cfg.delta;
    let mut scored = Vec::with_capacity(points.len());
    for &(x, oracle) in points {
        let approx_value = approx.evaluate(&dist, &IntervalQuery::new(n, x, delta)?);
        let err = (approx_value - oracle.value).abs() / delta;
        scored.push(PointError {
            x,
            approx_value,
            oracle,
            abs_err_per_delta: err,
            flagged: oracle.error_half_width / delta > FLAG_RATIO * err,
        });
    }
    // first maximum in grid order, so ties resolve deterministically
    let argmax = scored.iter().enumerate().fold(0, |best, (i, p)| {
        if p.abs_err_per_delta > scored[best].abs_err_per_delta {
            i
        } else {
            best
        }
    });
    let flagged = scored.iter().filter(|p| p.flagged).count();
    let total = scored.len();
    if flagged as f64 > MAX_FLAGGED_SHARE * total as f64 {
        return Err(Error::CertificateDominated {
            n,
            flagged,
            total,
            advisory: advisory(cfg),
        });
    }
    Ok(SweepResult {
        n,
        approx,
        points: scored,
        argmax,
        flagged,
    })
}

/// Full grid sweep for one `n` with the configured approximation.
pub fn sweep_n(cfg: &SweepConfig, n: u64) -> Result<SweepResult> {
    if !cfg.n_list.contains(&n) {
        return Err(Error::param("n", format!("{n} is not in n_list")));
    }
    let points = oracle_points(cfg, n)?;
    score_points(cfg, n, cfg.approx, &points)
}

/// `sup_x |oracle − approx| / Δ` over the grid.
pub fn sup_error(cfg: &SweepConfig, n: u64) -> Result<f64> {
    Ok(sweep_n(cfg, n)?.sup())
}

/// Sweeps for every `n` in the list, in list order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepResult>> {
    cfg.validate()?;
    cfg.n_list.iter().map(|&n| sweep_n(cfg, n)).collect()
}

/// Least-squares line through `(ln n, ln err)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    /// A fit is usable as a rate estimate only when it explains the data.
    pub fn is_valid(&self) -> bool {
        self.r_squared >= 0.9
    }
}

pub fn rate_fit(points: &[(u64, f64)]) -> Result<RateFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, e)| n > 0 && e > 0.0 && e.is_finite())
        .map(|&(n, e)| ((n as f64).ln(), e.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientPoints(logs.len()));
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "need at least two distinct n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Atom floor against the approximation for `atomic_mix` at `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomFloorReport {
    pub n: u64,
    pub delta: f64,
    /// `2⁻ⁿ`, a lower bound on `P(S_n = 0)`.
    pub floor: f64,
    pub formula_value: f64,
    pub ratio: f64,
}

pub fn atom_floor_demo(n: u64, delta: f64) -> Result<AtomFloorReport> {
    if n == 0 || n > 1000 {
        return Err(Error::param("n", format!("must lie in 1..=1000, got {n}")));
    }
    let floor = 0.5f64.powi(n as i32);
    if !(delta > 0.0 && delta < floor) {
        return Err(Error::param(
            "delta",
            format!("the floor regime needs 0 < Δ < 2^-{n} = {floor:e}, got {delta:e}"),
        ));
    }
    let dist = builtin("atomic_mix")?;
    let formula_value = refined_approx(&dist, &IntervalQuery::new(n, 0.0, delta)?).total;
    Ok(AtomFloorReport {
        n,
        delta,
        floor,
        formula_value,
        ratio: floor / formula_value,
    })
}

/// `|Σ_k approx(n, kΔ, Δ) − 1|` over the partition cells with `|kΔ| ≤ 10√n`.
pub fn mass_check(dist: &DistributionSpec, n: u64, delta: f64) -> Result<f64> {
    let reach = 10.0 * (n as f64).sqrt();
    let k_max = (reach / delta).floor() as i64;
    let mut total = 0.0;
    for k in -k_max..=k_max {
        total += refined_approx(dist, &IntervalQuery::new(n, k as f64 * delta, delta)?).total;
    }
    Ok((total - 1.0).abs())
}

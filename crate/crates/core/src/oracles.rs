//! Ground-truth estimators for `P(S_n ∈ [x, x+Δ))`.
//!
//! The FFT oracle bins `X` onto a lattice of spacing `h` by exact CDF
//! increments (cell masses sit at cell centres), convolves `n` copies by DFT,
//! and reads interval masses back by spreading each lattice mass uniformly
//! over its cell. Atoms are kept on cell centres and tracked exactly.
//!
//! The Monte Carlo oracle counts hits over seeded, chunked ChaCha streams, so
//! its output does not depend on the number of worker threads.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::dist_zoo::DistributionSpec;
use crate::edgeworth::IntervalQuery;
use crate::error::{Error, Result};
use crate::par::map_range;

/// Default cap on transform length (complex points).
pub const DEFAULT_FFT_BUDGET: usize = 1 << 23;

/// Grid radius for `S_n` in standard-deviation units.
pub const SUM_GRID_RADIUS: f64 = 12.0;

const MC_CHUNK: usize = 1 << 16;

/// Rounding floor added to FFT certificates.
const FFT_ROUNDING_FLOOR: f64 = 1e-13;

/// Exact atom on a lattice cell centre. Its mass is also included in
/// `masses[index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAtom {
    pub index: usize,
    pub location: f64,
    pub mass: f64,
}

/// Point masses on the lattice `origin + k·spacing`; each represents the
/// probability of the cell `[c − h/2, c + h/2)` around its centre `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPMF {
    pub origin: f64,
    pub spacing: f64,
    pub masses: Vec<f64>,
    pub atom: Option<GridAtom>,
    /// Probability not represented on the grid (truncated tails).
    pub tail_deficit: f64,
    /// Bound on probability that wrapped around a cyclic window.
    pub alias_bound: f64,
}

impl GridPMF {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn location(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        let total = self.total_mass();
        let mean = self
            .masses
            .iter()
            .enumerate()
            .map(|(k, m)| m * self.location(k))
            .sum::<f64>()
            / total;
        let var = self
            .masses
            .iter()
            .enumerate()
            .map(|(k, m)| m * (self.location(k) - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// Mass on `[x, x+Δ)`; boundary cells are split by overlap length, an
    /// atom counts only when its location lies inside the interval.
    pub fn interval_mass(&self, x: f64, delta: f64) -> f64 {
        let h = self.spacing;
        let len = self.masses.len() as i64;
        let cell_of = |t: f64| ((t - self.origin) / h + 0.5).floor() as i64;
        let (first, last) = (cell_of(x), cell_of(x + delta));
        let mass = |j: i64| -> f64 {
            if j < 0 || j >= len {
                return 0.0;
            }
            let m = self.masses[j as usize];
            match self.atom {
                Some(a) if a.index as i64 == j => m - a.mass,
                _ => m,
            }
        };
        let mut total = if first == last {
            mass(first) * delta / h
        } else {
            let lo_edge = self.origin + (first as f64 + 0.5) * h;
            let hi_edge = self.origin + (last as f64 - 0.5) * h;
            let mut s = mass(first) * (lo_edge - x) / h + mass(last) * (x + delta - hi_edge) / h;
            for j in (first + 1).max(0)..last.min(len) {
                s += mass(j);
            }
            s
        };
        if let Some(a) = self.atom {
            if a.location >= x && a.location < x + delta {
                total += a.mass;
            }
        }
        total
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::param("h", format!("must lie in (0, 1e-2], got {h}")));
    }
    Ok(())
}

/// Bin `X` onto cells of width `h` centred on the lattice through its atom
/// (or through 0), keeping `[-radius, radius]`.
pub fn discretize(dist: &DistributionSpec, h: f64, radius: f64) -> Result<GridPMF> {
    check_spacing(h)?;
    if !(radius >= 8.0) || !radius.is_finite() {
        return Err(Error::param(
            "radius",
            format!("must be at least 8, got {radius}"),
        ));
    }
    let anchor = dist.atom.map_or(0.0, |a| a.location);
    let (s_lo, s_hi) = dist.support();
    let lo = s_lo.max(-radius);
    let hi = s_hi.min(radius);
    let k_min = ((lo - anchor) / h + 0.5).floor() as i64;
    let k_max = ((hi - anchor) / h + 0.5).floor() as i64;
    let origin = anchor + k_min as f64 * h;
    let masses: Vec<f64> = (k_min..=k_max)
        .map(|k| {
            let c = anchor + k as f64 * h;
            dist.continuous_mass((c - 0.5 * h).max(lo), (c + 0.5 * h).min(hi))
        })
        .collect();
    let mut pmf = GridPMF {
        origin,
        spacing: h,
        masses,
        atom: None,
        tail_deficit: dist.continuous_mass_outside(lo, hi),
        alias_bound: 0.0,
    };
    if let Some(a) = dist.atom {
        if a.location >= lo && a.location <= hi {
            let index = (-k_min) as usize;
            pmf.masses[index] += a.mass;
            pmf.atom = Some(GridAtom {
                index,
                location: a.location,
                mass: a.mass,
            });
        } else {
            pmf.tail_deficit += a.mass;
        }
    }
    Ok(pmf)
}

fn power_transform(buf: &mut [Complex64], n: u64) {
    let len = buf.len();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(buf);
    let exp = i32::try_from(n).expect("n fits in i32");
    for c in buf.iter_mut() {
        *c = c.powi(exp);
    }
    planner.plan_fft_inverse(len).process(buf);
    let scale = 1.0 / len as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
}

/// Clip negative rounding dust and rescale to `target` total mass.
fn clean_masses(raw: impl Iterator<Item = f64>, target: f64) -> Vec<f64> {
    let mut masses: Vec<f64> = raw.map(|m| m.max(0.0)).collect();
    let sum: f64 = masses.iter().sum();
    if sum > 0.0 {
        let s = target / sum;
        masses.iter_mut().for_each(|m| *m *= s);
    }
    masses
}

fn sum_deficit(deficit: f64, n: u64) -> f64 {
    -libm::expm1(n as f64 * libm::log1p(-deficit))
}

fn sum_atom(pmf: &GridPMF, n: u64, index: usize) -> Option<GridAtom> {
    pmf.atom.map(|a| GridAtom {
        index,
        location: n as f64 * a.location,
        mass: a.mass.powi(n as i32),
    })
}

/// Exact-support `n`-fold convolution via one zero-padded transform.
pub fn convolve_n(pmf: &GridPMF, n: u64) -> Result<GridPMF> {
    convolve_n_with_budget(pmf, n, DEFAULT_FFT_BUDGET)
}

pub fn convolve_n_with_budget(pmf: &GridPMF, n: u64, budget: usize) -> Result<GridPMF> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if n == 1 {
        return Ok(pmf.clone());
    }
    let len = pmf.masses.len();
    let out_len = (n as usize) * (len - 1) + 1;
    let fft_len = out_len.next_power_of_two();
    if fft_len > budget {
        return Err(Error::MemoryBudget {
            needed: fft_len,
            budget,
            minimal_h: pmf.spacing * out_len as f64 / budget as f64,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for (b, &m) in buf.iter_mut().zip(&pmf.masses) {
        b.re = m;
    }
    power_transform(&mut buf, n);
    let target = pmf.total_mass().powi(n as i32);
    Ok(GridPMF {
        origin: n as f64 * pmf.origin,
        spacing: pmf.spacing,
        masses: clean_masses(buf[..out_len].iter().map(|c| c.re), target),
        atom: pmf
            .atom
            .and_then(|a| sum_atom(pmf, n, a.index * n as usize)),
        tail_deficit: sum_deficit(pmf.tail_deficit, n),
        alias_bound: 0.0,
    })
}

/// `n`-fold convolution kept on a window `[lo, hi]` by cyclic wrapping.
/// `alias_bound` must bound the probability of `S_n` falling outside it.
pub fn convolve_n_windowed(
    pmf: &GridPMF,
    n: u64,
    lo: f64,
    hi: f64,
    alias_bound: f64,
    budget: usize,
) -> Result<GridPMF> {
    let h = pmf.spacing;
    let base = n as f64 * pmf.origin;
    let m0 = ((lo - base) / h).floor() as i64;
    let cells = ((hi - lo) / h).ceil() as usize + 2;
    let fft_len = cells.next_power_of_two();
    if fft_len > budget {
        return Err(Error::MemoryBudget {
            needed: fft_len,
            budget,
            minimal_h: h * cells as f64 / budget as f64,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
    for (k, &m) in pmf.masses.iter().enumerate() {
        buf[k % fft_len].re += m;
    }
    power_transform(&mut buf, n);
    // slot s holds lattice offsets m ≡ s (mod N); unwrap to m0 .. m0 + N
    let nl = fft_len as i64;
    let slot = |m: i64| m.rem_euclid(nl) as usize;
    let raw = (0..fft_len).map(|j| buf[slot(m0 + j as i64)].re);
    let target = pmf.total_mass().powi(n as i32);
    let atom = pmf.atom.and_then(|a| {
        let m = (a.index * n as usize) as i64;
        let j = m - m0;
        (0..nl)
            .contains(&j)
            .then(|| sum_atom(pmf, n, j as usize))
            .flatten()
    });
    Ok(GridPMF {
        origin: base + m0 as f64 * h,
        spacing: h,
        masses: clean_masses(raw, target),
        atom,
        tail_deficit: sum_deficit(pmf.tail_deficit, n),
        alias_bound,
    })
}

/// Kind of error certificate attached to an oracle value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Discretization,
    Confidence,
    Bracket,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Discretization => "discretization",
            ErrorKind::Confidence => "confidence",
            ErrorKind::Bracket => "bracket",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    /// Clipped to `[0, 1]`.
    pub value: f64,
    pub error_kind: ErrorKind,
    pub error_half_width: f64,
}

impl OracleEstimate {
    pub fn new(value: f64, error_kind: ErrorKind, error_half_width: f64) -> Self {
        OracleEstimate {
            value: value.clamp(0.0, 1.0),
            error_kind,
            error_half_width: error_half_width.max(0.0),
        }
    }

    pub fn agrees_with(&self, other: &OracleEstimate) -> bool {
        (self.value - other.value).abs() <= self.error_half_width + other.error_half_width
    }
}

/// Law of `S_n` on two nested lattices (`h` and `2h`); the difference of the
/// two readouts is the discretization certificate.
#[derive(Clone, Debug)]
pub struct FftOracle {
    pub n: u64,
    pub h: f64,
    fine: GridPMF,
    coarse: GridPMF,
}

impl FftOracle {
    pub fn new(dist: &DistributionSpec, n: u64, h: f64) -> Result<Self> {
        Self::with_budget(dist, n, h, DEFAULT_FFT_BUDGET)
    }

    pub fn with_budget(dist: &DistributionSpec, n: u64, h: f64, budget: usize) -> Result<Self> {
        check_spacing(h)?;
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        let fine = sum_law(dist, n, h, budget)?;
        let coarse = sum_law(dist, n, 2.0 * h, budget)?;
        Ok(FftOracle { n, h, fine, coarse })
    }

    pub fn law(&self) -> &GridPMF {
        &self.fine
    }

    pub fn estimate(&self, x: f64, delta: f64) -> OracleEstimate {
        let p = self.fine.interval_mass(x, delta);
        let p2 = self.coarse.interval_mass(x, delta);
        let hw =
            (p - p2).abs() + self.fine.tail_deficit + self.fine.alias_bound + FFT_ROUNDING_FLOOR;
        OracleEstimate::new(p, ErrorKind::Discretization, hw)
    }

    /// Worst-case half-width `(2h/Δ)·value + tail`, assuming each boundary
    /// cell could be entirely misattributed.
    pub fn conservative_half_width(&self, estimate: &OracleEstimate, delta: f64) -> f64 {
        2.0 * self.h / delta * estimate.value + self.fine.tail_deficit + self.fine.alias_bound
    }
}

/// Per-term tail mass left off the `X` grid.
const STEP_TAIL: f64 = 1e-16;

fn sum_law(dist: &DistributionSpec, n: u64, h: f64, budget: usize) -> Result<GridPMF> {
    let nf = n as f64;
    let mut radius = 8.0f64;
    while nf * dist.continuous_mass_outside(-radius, radius) > STEP_TAIL * nf.max(1.0)
        && radius < 400.0
    {
        radius += 1.0;
    }
    let pmf = discretize(dist, h, radius)?;
    let len = pmf.masses.len();
    let out_len = (n as usize) * (len - 1) + 1;

    let (w_lo, w_hi) = dist.sum_window(n, 1e-15);
    let grid = SUM_GRID_RADIUS * nf.sqrt();
    let (s_lo, s_hi) = dist.support();
    let slack = 0.5 * nf * h + h;
    let lo = (w_lo.min(-grid) - slack).max(nf * s_lo - h);
    let hi = (w_hi.max(grid) + slack).min(nf * s_hi + h);
    if (out_len as f64) * h <= hi - lo {
        return convolve_n_with_budget(&pmf, n, budget);
    }
    // |X_d − X| ≤ h/2 per term, so S_n leaves the window by at least slack − nh/2
    let margin = slack - 0.5 * nf * h;
    let alias =
        dist.chernoff_lower_tail(n, -(lo + margin)) + dist.chernoff_upper_tail(n, hi - margin);
    convolve_n_windowed(&pmf, n, lo, hi, alias.min(1.0), budget)
}

/// FFT estimate of `P(S_n ∈ [x, x+Δ))` on lattice spacing `h`.
pub fn interval_prob_fft(
    dist: &DistributionSpec,
    q: &IntervalQuery,
    h: f64,
) -> Result<OracleEstimate> {
    Ok(FftOracle::new(dist, q.n, h)?.estimate(q.x, q.delta))
}

/// Monte Carlo estimate with a 95% Wald half-width and a continuity floor of
/// `1.96/(2·samples)`.
pub fn interval_prob_mc(
    dist: &DistributionSpec,
    q: &IntervalQuery,
    samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if samples < 1000 {
        return Err(Error::param(
            "samples",
            format!("need at least 1000, got {samples}"),
        ));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: usize = map_range(chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        (0..count)
            .filter(|_| {
                let s = dist.sample_sum_once(q.n, &mut rng);
                s >= q.x && s < q.x + q.delta
            })
            .count()
    })
    .into_iter()
    .sum();
    let m = samples as f64;
    let p = hits as f64 / m;
    let hw = (1.96 * (p * (1.0 - p) / m).sqrt()).max(1.96 / (2.0 * m));
    Ok(OracleEstimate::new(p, ErrorKind::Confidence, hw))
}

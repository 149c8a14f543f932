//! Standardized (mean 0, variance 1) non-lattice distributions with exact
//! characteristic functions, closed-form moments, seeded sampling and a grid
//! scan for Cramér's strong non-lattice condition.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const LAPLACE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Below this |λ| the ch.f. Taylor residual is summed as a moment series
/// instead of being formed by cancellation.
const SERIES_CUTOFF: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `U(-√3, √3)`.
    StdUniform,
    /// `Exp(1) - 1`.
    StdExponential,
    /// Laplace with scale `1/√2`.
    StdLaplace,
    /// `B·Z` with `B ~ Bernoulli(1/2)`, `Z ~ N(0, 2)`.
    AtomicMix,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::StdUniform,
        Family::StdExponential,
        Family::StdLaplace,
        Family::AtomicMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StdUniform => "std_uniform",
            Family::StdExponential => "std_exponential",
            Family::StdLaplace => "std_laplace",
            Family::AtomicMix => "atomic_mix",
        }
    }
}

/// A point mass inside an otherwise continuous law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A standardized distribution from the built-in zoo.
///
/// Values are immutable once built; everything that draws random numbers takes
/// an explicit RNG or seed, so a `DistributionSpec` can be shared freely across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec {
    family: Family,
    /// Third moment `E X³`.
    pub mu3: f64,
    /// Moment order `r` of the class `E|X|^r < ∞`.
    pub r: f64,
    /// `E|X|^r`, the moment bound `b`.
    pub abs_moment_r: f64,
    /// `Some(R)` when the support lies in `[-R, R]`.
    pub support_radius: Option<f64>,
    pub atom: Option<Atom>,
}

/// Look up a zoo member by name.
pub fn builtin(name: &str) -> Result<DistributionSpec> {
    Family::ALL
        .iter()
        .find(|f| f.name() == name)
        .map(|&f| DistributionSpec::from_family(f))
        .ok_or_else(|| Error::UnknownDistribution {
            name: name.to_owned(),
            valid: Family::ALL.iter().map(|f| f.name()).collect(),
        })
}

/// Every zoo member, in a fixed order.
pub fn zoo() -> Vec<DistributionSpec> {
    Family::ALL
        .iter()
        .map(|&f| DistributionSpec::from_family(f))
        .collect()
}

impl DistributionSpec {
    pub fn from_family(family: Family) -> Self {
        let (mu3, abs_moment_r, support_radius, atom) = match family {
            Family::StdUniform => (0.0, 9.0 / 5.0, Some(SQRT3), None),
            Family::StdExponential => (2.0, 9.0, None, None),
            Family::StdLaplace => (0.0, 6.0, None, None),
            Family::AtomicMix => (
                0.0,
                6.0,
                None,
                Some(Atom {
                    location: 0.0,
                    mass: 0.5,
                }),
            ),
        };
        DistributionSpec {
            family,
            mu3,
            r: 4.0,
            abs_moment_r,
            support_radius,
            atom,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    /// Characteristic function `E e^{iλX}`.
    pub fn chf(&self, lambda: f64) -> Complex64 {
        match self.family {
            Family::StdUniform => Complex64::new(sinc(SQRT3 * lambda), 0.0),
            Family::StdExponential => {
                Complex64::from_polar(1.0, -lambda) / Complex64::new(1.0, -lambda)
            }
            Family::StdLaplace => Complex64::new(1.0 / (1.0 + 0.5 * lambda * lambda), 0.0),
            Family::AtomicMix => Complex64::new(0.5 + 0.5 * (-lambda * lambda).exp(), 0.0),
        }
    }

    /// A non-increasing envelope `E(t) ≥ sup_{|μ| ≥ t} |φ(μ)|`, used to tighten
    /// truncation bounds in ch.f. inversion.
    pub fn chf_envelope(&self, lambda: f64) -> f64 {
        let t = lambda.abs();
        match self.family {
            Family::StdUniform => (1.0 / (SQRT3 * t)).min(1.0),
            Family::StdExponential => 1.0 / (1.0 + t * t).sqrt(),
            Family::StdLaplace | Family::AtomicMix => self.chf(t).norm(),
        }
    }

    /// Lower and upper end of the support (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match self.family {
            Family::StdUniform => (-SQRT3, SQRT3),
            Family::StdExponential => (-1.0, f64::INFINITY),
            Family::StdLaplace | Family::AtomicMix => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Mass the continuous part puts on `[a, b)`. Atoms are excluded.
    pub fn continuous_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.family {
            Family::StdUniform => {
                let lo = a.max(-SQRT3);
                let hi = b.min(SQRT3);
                ((hi - lo) / (2.0 * SQRT3)).max(0.0)
            }
            Family::StdExponential => {
                // survival of Exp(1) - 1 is e^{-(t+1)} on t >= -1
                let lo = a.max(-1.0);
                if b <= lo {
                    return 0.0;
                }
                (-(lo + 1.0)).exp() * -libm::expm1(-(b - lo))
            }
            Family::StdLaplace => {
                let s = LAPLACE_SCALE;
                if a >= 0.0 {
                    0.5 * (-a / s).exp() * -libm::expm1(-(b - a) / s)
                } else if b <= 0.0 {
                    0.5 * (b / s).exp() * -libm::expm1(-(b - a) / s)
                } else {
                    1.0 - 0.5 * (a / s).exp() - 0.5 * (-b / s).exp()
                }
            }
            Family::AtomicMix => {
                // half of N(0, 2): Φ(t/√2) = erfc(-t/2)/2
                let (ua, ub) = (a / 2.0, b / 2.0);
                let m = if ua >= 0.0 {
                    0.5 * (libm::erfc(ua) - libm::erfc(ub))
                } else if ub <= 0.0 {
                    0.5 * (libm::erfc(-ub) - libm::erfc(-ua))
                } else {
                    1.0 - 0.5 * libm::erfc(-ua) - 0.5 * libm::erfc(ub)
                };
                0.5 * m
            }
        }
    }

    /// Continuous mass outside `[lo, hi)`.
    pub fn continuous_mass_outside(&self, lo: f64, hi: f64) -> f64 {
        self.continuous_mass(f64::NEG_INFINITY, lo) + self.continuous_mass(hi, f64::INFINITY)
    }

    /// `log E e^{θX}`, or `None` where the moment generating function diverges.
    pub fn log_mgf(&self, theta: f64) -> Option<f64> {
        match self.family {
            Family::StdUniform => {
                let t = (SQRT3 * theta).abs();
                if t < 1e-4 {
                    Some(t * t / 6.0)
                } else {
                    // ln(sinh t / t), overflow-free
                    Some(t - (2.0 * t).ln() + libm::log1p(-(-2.0 * t).exp()))
                }
            }
            Family::StdExponential => (theta < 1.0).then(|| -theta - libm::log1p(-theta)),
            Family::StdLaplace => {
                let st = LAPLACE_SCALE * theta;
                (st.abs() < 1.0).then(|| -libm::log1p(-st * st))
            }
            Family::AtomicMix => {
                let t2 = theta * theta;
                // ln(1/2 + e^{θ²}/2)
                Some(t2 + libm::log1p((-t2).exp()) - std::f64::consts::LN_2)
            }
        }
    }

    /// `E X^k / k!`, the Taylor coefficient of `φ` in powers of `iλ`.
    pub fn moment_coefficient(&self, k: u32) -> f64 {
        match self.family {
            Family::StdUniform => {
                if k % 2 == 1 {
                    return 0.0;
                }
                // 3^j / (2j+1)!
                let j = k / 2;
                let mut c = 1.0;
                for i in 1..=j {
                    c *= 3.0 / ((2 * i) as f64 * (2 * i + 1) as f64);
                }
                c
            }
            Family::StdExponential => {
                // subfactorial(k) / k! = Σ_{j≤k} (-1)^j / j!
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..=k {
                    term *= -1.0 / j as f64;
                    sum += term;
                }
                sum
            }
            Family::StdLaplace => {
                if k % 2 == 1 {
                    0.0
                } else {
                    0.5f64.powi((k / 2) as i32)
                }
            }
            Family::AtomicMix => {
                if k == 0 {
                    1.0
                } else if k % 2 == 1 {
                    0.0
                } else {
                    let j = k / 2;
                    0.5 / (1..=j).map(|i| i as f64).product::<f64>()
                }
            }
        }
    }

    /// `E X^k`.
    pub fn raw_moment(&self, k: u32) -> f64 {
        self.moment_coefficient(k) * (1..=k).map(|i| i as f64).product::<f64>()
    }

    /// `1 − φ(λ) − λ²/2 − iμ₃λ³/6`, free of cancellation near the origin.
    pub fn chf_taylor_residual(&self, lambda: f64) -> Complex64 {
        if lambda.abs() <= SERIES_CUTOFF {
            // -Σ_{k≥4} c_k (iλ)^k
            let mut sum = Complex64::new(0.0, 0.0);
            let mut power = Complex64::new(lambda.powi(4), 0.0);
            let step = Complex64::new(0.0, lambda);
            let mut small = 0;
            for k in 4..400 {
                let term = power * self.moment_coefficient(k);
                sum += term;
                // odd coefficients vanish for symmetric laws; need two quiet terms
                small = if term.norm() <= 1e-18 * sum.norm() {
                    small + 1
                } else {
                    0
                };
                if k > 12 && small >= 2 {
                    break;
                }
                power *= step;
            }
            -sum
        } else {
            let l2 = lambda * lambda;
            Complex64::new(1.0 - 0.5 * l2, -self.mu3 * l2 * lambda / 6.0) - self.chf(lambda)
        }
    }

    /// One draw of `X`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::StdUniform => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            Family::StdExponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            Family::StdLaplace => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    LAPLACE_SCALE * e
                } else {
                    -LAPLACE_SCALE * e
                }
            }
            Family::AtomicMix => {
                if rng.random::<bool>() {
                    let z: f64 = rng.sample(StandardNormal);
                    std::f64::consts::SQRT_2 * z
                } else {
                    0.0
                }
            }
        }
    }

    /// One draw of `S_n = X_1 + ⋯ + X_n`.
    pub fn sample_sum_once<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        (0..n).map(|_| self.sample(rng)).sum()
    }

    /// Chernoff bound on `P(S_n ≥ t)` for `t > 0`, minimised over a log-spaced
    /// grid of exponents. Returns 1 when no exponent helps.
    pub fn chernoff_upper_tail(&self, n: u64, t: f64) -> f64 {
        chernoff(|theta| self.log_mgf(theta), n, t)
    }

    /// Chernoff bound on `P(S_n ≤ -t)` for `t > 0`.
    pub fn chernoff_lower_tail(&self, n: u64, t: f64) -> f64 {
        chernoff(|theta| self.log_mgf(-theta), n, t)
    }

    /// An interval `[lo, hi]` with `P(S_n ∉ [lo, hi]) ≤ eps`, from the support
    /// where it is bounded and from Chernoff bounds otherwise.
    pub fn sum_window(&self, n: u64, eps: f64) -> (f64, f64) {
        let (s_lo, s_hi) = self.support();
        let nf = n as f64;
        let solve = |tail: &dyn Fn(f64) -> f64| {
            let mut t = nf.sqrt();
            while tail(t) > 0.5 * eps && t < 1e12 {
                t *= 1.25;
            }
            t
        };
        let lo = if s_lo.is_finite() {
            nf * s_lo
        } else {
            -solve(&|t| self.chernoff_lower_tail(n, t))
        };
        let hi = if s_hi.is_finite() {
            nf * s_hi
        } else {
            solve(&|t| self.chernoff_upper_tail(n, t))
        };
        (lo, hi)
    }
}

fn chernoff(log_mgf: impl Fn(f64) -> Option<f64>, n: u64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut best = 0.0f64;
    // θ from 1e-4 to 1e3, 400 points per decade
    for i in 0..=2800 {
        let theta = 10f64.powf(-4.0 + i as f64 / 400.0);
        if let Some(k) = log_mgf(theta) {
            best = best.min(nf * k - theta * t);
        }
    }
    best.exp()
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// Affine map that standardizes a variable with the given raw moments:
/// `x ↦ (x + shift)·scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization {
    pub shift: f64,
    pub scale: f64,
    /// Standardized third moment `E(X−μ)³ / σ³`.
    pub mu3: f64,
}

/// `raw_mu3` is the centered third moment `E(X − μ)³`.
pub fn standardize(raw_mean: f64, raw_sd: f64, raw_mu3: f64) -> Result<Standardization> {
    if !(raw_sd > 0.0) || !raw_sd.is_finite() {
        return Err(Error::param(
            "raw_sd",
            format!("must be positive and finite, got {raw_sd}"),
        ));
    }
    Ok(Standardization {
        shift: -raw_mean,
        scale: 1.0 / raw_sd,
        mu3: raw_mu3 / raw_sd.powi(3),
    })
}

impl Standardization {
    pub fn map_point(&self, x: f64) -> f64 {
        (x + self.shift) * self.scale
    }

    pub fn map_width(&self, delta: f64) -> f64 {
        delta * self.scale
    }

    /// Map a query about a raw sum of `n` terms onto the standardized sum;
    /// the sum's mean is `n` times the per-term mean.
    pub fn map_query(&self, q: crate::IntervalQuery) -> Result<crate::IntervalQuery> {
        crate::IntervalQuery::new(
            q.n,
            (q.x + q.n as f64 * self.shift) * self.scale,
            self.map_width(q.delta),
        )
    }
}

/// Result of a grid scan for `sup |φ(λ)|` over `λ ∈ [epsilon, lambda_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CramerScan {
    pub epsilon: f64,
    pub lambda_max: f64,
    pub grid_step: f64,
    pub rho_hat: f64,
    /// Grid point where the maximum was attained.
    pub argmax: f64,
}

/// Grid scan of `|φ|` on `[epsilon, lambda_max]`; negative λ are covered by
/// the conjugate symmetry of the ch.f.
pub fn cramer_sup(
    dist: &DistributionSpec,
    epsilon: f64,
    lambda_max: f64,
    grid_step: f64,
) -> Result<CramerScan> {
    if !(epsilon > 0.0 && epsilon < lambda_max) {
        return Err(Error::param(
            "epsilon",
            format!("need 0 < epsilon < lambda_max, got {epsilon} and {lambda_max}"),
        ));
    }
    if !(grid_step > 0.0 && grid_step <= 1e-2) {
        return Err(Error::param(
            "grid_step",
            format!("must lie in (0, 1e-2], got {grid_step}"),
        ));
    }
    let steps = ((lambda_max - epsilon) / grid_step).floor() as usize;
    let mut rho_hat = 0.0;
    let mut argmax = epsilon;
    let mut visit = |lambda: f64| {
        let m = dist.chf(lambda).norm();
        if m > rho_hat {
            rho_hat = m;
            argmax = lambda;
        }
    };
    for k in 0..=steps {
        visit(epsilon + k as f64 * grid_step);
    }
    visit(lambda_max);
    Ok(CramerScan {
        epsilon,
        lambda_max,
        grid_step,
        rho_hat: rho_hat.min(1.0),
        argmax,
    })
}

/// `count` independent draws of `S_n`, reproducible bit-for-bit from `seed`.
pub fn sample_sum(dist: &DistributionSpec, n: u64, seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| dist.sample_sum_once(n, &mut rng))
        .collect()
}

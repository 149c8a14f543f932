//! Smoothed characteristic-function inversion for interval probabilities.
//!
//! Adding an independent `∓δU` (`U` uniform on `(0, 1)`) to `S_n` makes the
//! ch.f. of the sum integrable, so
//!
//! ```text
//! P(S_n − δU ∈ [x, x+w)) = (w/2π) ∫ e^{−iλx} φ(λ)ⁿ ψ(δλ) ψ(wλ) dλ,
//! ψ(t) = (1 − e^{−it}) / (it),
//! ```
//!
//! and shrinking or widening the interval by `δ` turns the smoothed values
//! into a deterministic bracket around `P(S_n ∈ [x, x+Δ))`.
//!
//! The integral is truncated at `±Λ` using `|ψ(δλ)ψ(wλ)| ≤ min(1, 4/(δwλ²))`
//! times a non-increasing envelope of `|φ|ⁿ`, and evaluated with the composite
//! trapezoid rule. Step halving supplies the quadrature certificate.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::dist_zoo::{cramer_sup, DistributionSpec};
use crate::edgeworth::IntervalQuery;
use crate::error::{Error, Result};

/// Quadrature step selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRule {
    /// Upper limit on the trapezoid step.
    pub max_step: f64,
    /// Most step halvings tried while the certificate exceeds `tail_tol`.
    pub max_halvings: u32,
    /// Refuse integrals needing more nodes than this.
    pub node_budget: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule {
            max_step: 0.5,
            max_halvings: 6,
            node_budget: 50_000_000,
        }
    }
}

impl StepRule {
    /// Initial step: fine enough for oscillation at frequency `|x|` and the
    /// `n^{-1/2}` Gaussian width of `φⁿ`.
    pub fn initial_step(&self, n: u64, x: f64) -> f64 {
        self.max_step
            .min(PI / (4.0 * (1.0 + x.abs() + (n as f64).sqrt())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InversionConfig {
    /// Smoothing width `δ`.
    pub delta_smooth: f64,
    /// Fixed truncation point; `None` solves for the smallest `Λ` whose tail
    /// bound is at most `tail_tol`.
    pub lambda_trunc: Option<f64>,
    pub step_rule: StepRule,
    pub tail_tol: f64,
    /// Largest `Λ` the solver may pick.
    pub lambda_cap: f64,
}

impl InversionConfig {
    /// Defaults for a query: `δ = Δ/n`, tail tolerance `1e-9`.
    pub fn for_query(q: &IntervalQuery) -> Self {
        InversionConfig {
            delta_smooth: q.delta / q.n as f64,
            lambda_trunc: None,
            step_rule: StepRule::default(),
            tail_tol: 1e-9,
            lambda_cap: 1e7,
        }
    }

    pub fn with_delta_smooth(mut self, delta_smooth: f64) -> Self {
        self.delta_smooth = delta_smooth;
        self
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }
}

/// `ψ(λ) = E e^{−iλU}`, the ch.f. of `−U`.
pub fn psi_eval(lambda: f64) -> Complex64 {
    if lambda.abs() < 1e-4 {
        let l2 = lambda * lambda;
        Complex64::new(1.0 - l2 / 6.0, -lambda / 2.0 + lambda * l2 / 24.0)
    } else {
        let half = (0.5 * lambda).sin();
        Complex64::new(lambda.sin() / lambda, -2.0 * half * half / lambda)
    }
}

/// A smoothed interval probability with its error certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedProbability {
    pub value: f64,
    /// Imaginary part of the numeric integral; zero up to rounding.
    pub imag_residual: f64,
    /// Analytic bound on the part of the integral beyond `±lambda_trunc`.
    pub truncation_bound: f64,
    /// Change under the last step halving.
    pub quadrature_error: f64,
    pub lambda_trunc: f64,
    pub step: f64,
    pub nodes: usize,
}

impl SmoothedProbability {
    pub fn certificate(&self) -> f64 {
        self.truncation_bound + self.quadrature_error
    }
}

/// Which smoothing sign is applied to `S_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Smoothing {
    /// `S_n − δU`, kernel `ψ(δλ)`.
    Minus,
    /// `S_n + δU`, kernel `ψ(−δλ) = conj ψ(δλ)`.
    Plus,
}

/// `∫_L^∞ min(1, c/λ²) dλ`.
fn kernel_tail(c: f64, l: f64) -> f64 {
    let root = c.sqrt();
    if l >= root {
        c / l
    } else {
        2.0 * root - l.max(0.0)
    }
}

struct Integrand<'a> {
    dist: &'a DistributionSpec,
    n: u64,
    x: f64,
    width: f64,
    delta_smooth: f64,
    smoothing: Smoothing,
}

impl Integrand<'_> {
    fn eval(&self, lambda: f64) -> Complex64 {
        let chf_n = self.dist.chf(lambda).powi(self.n as i32);
        let mut smooth = psi_eval(self.delta_smooth * lambda);
        if self.smoothing == Smoothing::Plus {
            smooth = smooth.conj();
        }
        Complex64::from_polar(1.0, -lambda * self.x)
            * chf_n
            * smooth
            * psi_eval(self.width * lambda)
    }

    /// `|φ(λ)|ⁿ |ψ(δλ) ψ(wλ)|`.
    fn modulus(&self, lambda: f64) -> f64 {
        self.dist.chf(lambda).norm().powi(self.n as i32)
            * psi_eval(self.delta_smooth * lambda).norm()
            * psi_eval(self.width * lambda).norm()
    }

    /// Bound on `∫_{|λ|≥L} |integrand| dλ` (both sides).
    fn abs_tail(&self, l: f64) -> f64 {
        let c = 4.0 / (self.delta_smooth * self.width);
        2.0 * self.dist.chf_envelope(l).powi(self.n as i32) * kernel_tail(c, l)
    }

    fn prefactor(&self) -> f64 {
        self.width / (2.0 * PI)
    }
}

/// Composite trapezoid on the symmetric grid `k·h`, `|k| ≤ half`.
fn trapezoid_symmetric(f: &impl Fn(f64) -> Complex64, h: f64, half: usize) -> Complex64 {
    let mut sum = f(0.0);
    for k in 1..half {
        let l = k as f64 * h;
        sum += f(l) + f(-l);
    }
    let edge = half as f64 * h;
    sum += 0.5 * (f(edge) + f(-edge));
    sum * h
}

/// Composite Simpson on `[a, b]` with step at most `h`.
fn simpson<T>(f: impl Fn(f64) -> T, a: f64, b: f64, h: f64) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    if b <= a {
        return T::default();
    }
    let m = 2 * ((b - a) / (2.0 * h)).ceil().max(1.0) as usize;
    let step = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum = sum + f(a + k as f64 * step) * w;
    }
    sum * (step / 3.0)
}

fn solve_truncation(integrand: &Integrand<'_>, cfg: &InversionConfig) -> Result<f64> {
    if let Some(l) = cfg.lambda_trunc {
        if !(l > 0.0) {
            return Err(Error::param(
                "lambda_trunc",
                format!("must be positive, got {l}"),
            ));
        }
        return Ok(l);
    }
    let tail = |l: f64| integrand.prefactor() * integrand.abs_tail(l);
    let cap_tail = tail(cfg.lambda_cap);
    if cap_tail > cfg.tail_tol {
        return Err(Error::UnattainableTolerance {
            requested: cfg.tail_tol,
            achievable: cap_tail,
        });
    }
    // bisection in log λ; the bound is non-increasing
    let (mut lo, mut hi) = (1e-3f64.ln(), cfg.lambda_cap.ln());
    if tail(lo.exp()) <= cfg.tail_tol {
        return Ok(lo.exp());
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tail(mid.exp()) <= cfg.tail_tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

fn invert(integrand: &Integrand<'_>, cfg: &InversionConfig) -> Result<SmoothedProbability> {
    // An interval outside the window holding all but tail_tol of the mass is
    // answered directly; resolving its oscillation would need a step of 1/|x|.
    let (lo, hi) = integrand.dist.sum_window(integrand.n, cfg.tail_tol);
    let (lo, hi) = (lo - integrand.delta_smooth, hi + integrand.delta_smooth);
    if integrand.x + integrand.width <= lo || integrand.x >= hi {
        return Ok(SmoothedProbability {
            value: 0.0,
            imag_residual: 0.0,
            truncation_bound: cfg.tail_tol,
            quadrature_error: 0.0,
            lambda_trunc: 0.0,
            step: 0.0,
            nodes: 0,
        });
    }
    let lambda = solve_truncation(integrand, cfg)?;
    let f = |l: f64| integrand.eval(l);
    let rule = cfg.step_rule;
    let mut h = rule.initial_step(integrand.n, integrand.x);
    let mut half = (lambda / h).ceil() as usize;
    let nodes = |half: usize| 2 * half + 1;
    if nodes(half) > rule.node_budget {
        return Err(Error::param(
            "lambda_trunc",
            format!(
                "Λ = {lambda:e} with step {h:e} needs {} nodes, over the budget of {}",
                nodes(half),
                rule.node_budget
            ),
        ));
    }
    let mut coarse = trapezoid_symmetric(&f, h, half);
    let mut halvings = 0;
    loop {
        // refine: same endpoints, midpoints added
        let fine_h = 0.5 * h;
        let fine_half = 2 * half;
        if nodes(fine_half) > rule.node_budget {
            return Err(Error::param(
                "step_rule",
                format!(
                    "step halving needs {} nodes, over the budget",
                    nodes(fine_half)
                ),
            ));
        }
        let mut mids = Complex64::new(0.0, 0.0);
        for k in 0..half {
            let l = (2 * k + 1) as f64 * fine_h;
            mids += f(l) + f(-l);
        }
        let fine = 0.5 * coarse + mids * fine_h;
        let quad_err = integrand.prefactor() * (fine - coarse).norm();
        halvings += 1;
        h = fine_h;
        half = fine_half;
        coarse = fine;
        if quad_err <= cfg.tail_tol || halvings >= rule.max_halvings {
            let edge = half as f64 * h;
            let integral = coarse * integrand.prefactor();
            return Ok(SmoothedProbability {
                value: integral.re,
                imag_residual: integral.im,
                truncation_bound: integrand.prefactor() * integrand.abs_tail(edge),
                quadrature_error: quad_err,
                lambda_trunc: edge,
                step: h,
                nodes: nodes(half),
            });
        }
    }
}

fn check_smoothing(q: &IntervalQuery, cfg: &InversionConfig) -> Result<()> {
    if !(cfg.delta_smooth > 0.0) || cfg.delta_smooth > q.delta {
        return Err(Error::param(
            "delta_smooth",
            format!("need 0 < δ ≤ Δ = {}, got {}", q.delta, cfg.delta_smooth),
        ));
    }
    if !(cfg.tail_tol > 0.0) {
        return Err(Error::param("tail_tol", "must be positive"));
    }
    Ok(())
}

/// `P(S_n − δU ∈ [x, x+Δ))` by numerical inversion.
pub fn smoothed_interval_prob(
    dist: &DistributionSpec,
    q: &IntervalQuery,
    cfg: &InversionConfig,
) -> Result<SmoothedProbability> {
    check_smoothing(q, cfg)?;
    invert(
        &Integrand {
            dist,
            n: q.n,
            x: q.x,
            width: q.delta,
            delta_smooth: cfg.delta_smooth,
            smoothing: Smoothing::Minus,
        },
        cfg,
    )
}

/// Deterministic bounds on `P(S_n ∈ [x, x+Δ))` from the inclusions
/// `{S_n − δU ∈ [x, x+Δ−δ)} ⊂ {S_n ∈ [x, x+Δ)} ⊂ {S_n + δU ∈ [x, x+Δ+δ)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichBracket {
    pub lower: SmoothedProbability,
    pub upper: SmoothedProbability,
}

impl SandwichBracket {
    /// Combined numerical certificate of both ends.
    pub fn tol(&self) -> f64 {
        self.lower.certificate().max(self.upper.certificate())
    }

    pub fn width(&self) -> f64 {
        self.upper.value - self.lower.value
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower.value - self.tol() <= p && p <= self.upper.value + self.tol()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower.value + self.upper.value)
    }
}

pub fn sandwich_bracket(
    dist: &DistributionSpec,
    q: &IntervalQuery,
    cfg: &InversionConfig,
) -> Result<SandwichBracket> {
    check_smoothing(q, cfg)?;
    if cfg.delta_smooth >= q.delta {
        return Err(Error::param(
            "delta_smooth",
            format!(
                "the bracket needs δ < Δ, got δ = {} and Δ = {}",
                cfg.delta_smooth, q.delta
            ),
        ));
    }
    let base = Integrand {
        dist,
        n: q.n,
        x: q.x,
        width: q.delta - cfg.delta_smooth,
        delta_smooth: cfg.delta_smooth,
        smoothing: Smoothing::Minus,
    };
    let lower = invert(&base, cfg)?;
    let upper = invert(
        &Integrand {
            width: q.delta + cfg.delta_smooth,
            smoothing: Smoothing::Plus,
            ..base
        },
        cfg,
    )?;
    Ok(SandwichBracket { lower, upper })
}

/// `θ(λ)` from `1 − φ(λ) = λ²/2 + iμ₃λ³/6 + θ(λ)λ³`, together with the
/// moment bound `2^{4−r} E|X|^r |λ|^{r−3} / (r(r−1)(r−2))`.
pub fn chf_expansion_residual(dist: &DistributionSpec, lambda: f64) -> Result<(Complex64, f64)> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::param("lambda", "must be finite and non-zero"));
    }
    let theta = dist.chf_taylor_residual(lambda) / lambda.powi(3);
    let r = dist.r;
    let bound = 2f64.powf(4.0 - r) * dist.abs_moment_r * lambda.abs().powf(r - 3.0)
        / (r * (r - 1.0) * (r - 2.0));
    Ok((theta, bound))
}

/// Region split of the inversion integral with the matching analytic bounds.
///
/// `B₁ = {|λ| < h₁ n^{-1/3}}`, `B₂ = {h₁ n^{-1/3} ≤ |λ| < h₂}`, `B₃ = {|λ| ≥ h₂}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionDiagnostics {
    pub h1: f64,
    pub h2: f64,
    pub g: f64,
    /// Observed `sup_{|λ| ≥ h₂} |φ|`.
    pub rho: f64,
    /// Concrete geometric floor `q = (ρ^{1/2} + 1)/2`.
    pub q: f64,
    /// `η = ρ q^{-2}`.
    pub eta: f64,
    pub i1: Complex64,
    pub i2: Complex64,
    pub i3: Complex64,
    /// `n^{-1/2}(1 + 1/(2 g h₁² n^{1/3})) e^{−g h₁² n^{1/3}}`.
    pub i2_bound: f64,
    /// `4·2b ρⁿ / (δΔ)`, which is `8bΔ^{-2}ρⁿn` at `δ = Δ/n`.
    pub i3_bound: f64,
    /// `8bηⁿn`, valid for `Δ ≥ qⁿ`.
    pub i3_bound_eta: f64,
    /// `∫_{B₂} |φ|ⁿ|ψ(δλ)ψ(Δλ)| dλ`.
    pub i2_observed: f64,
    /// `∫_{B₃} |φ|ⁿ|ψ(δλ)ψ(Δλ)| dλ`, the analytic tail beyond `Λ` included.
    pub i3_observed: f64,
    /// Truncation point used for `I₃`.
    pub lambda_trunc: f64,
}

impl RegionDiagnostics {
    /// `(Δ/2π)·Re(I₁ + I₂ + I₃)`.
    pub fn recombined(&self, delta: f64) -> f64 {
        delta / (2.0 * PI) * (self.i1 + self.i2 + self.i3).re
    }
}

pub fn region_split_diagnostics(
    dist: &DistributionSpec,
    q: &IntervalQuery,
    cfg: &InversionConfig,
) -> Result<RegionDiagnostics> {
    check_smoothing(q, cfg)?;
    let b = dist.abs_moment_r;
    let r = dist.r;
    if !(b > 1.0) {
        return Err(Error::param(
            "abs_moment_r",
            format!(
                "the region construction needs b = E|X|^r > 1 (h₂ = 1/b < 1 and a finite (1 − b⁻²)⁻²), got {b}"
            ),
        ));
    }
    let nf = q.n as f64;
    let h2 = 1.0 / b;
    let h1 = (b.powf(3.0 / r) / 6.0 + b / 3.0 + 1.0 / (2.0 * (1.0 - b.powi(-2)).powi(2)))
        .powf(-1.0 / 3.0);
    let g = 0.5 * (1.0 - b.powf(3.0 / r - 1.0));

    let scan_max = 100f64.max(10.0 * h2);
    let scan = cramer_sup(dist, h2, scan_max, 1e-3)?;
    let rho = scan.rho_hat.max(dist.chf_envelope(scan_max));
    if !(rho < 1.0) {
        return Err(Error::param(
            "rho",
            "the ch.f. scan found sup |φ| = 1 beyond h₂",
        ));
    }
    let q_floor = 0.5 * (rho.sqrt() + 1.0);
    let eta = rho / (q_floor * q_floor);

    let edge1 = h1 * nf.powf(-1.0 / 3.0);
    let gh = g * h1 * h1 * nf.cbrt();
    let i2_bound = nf.powf(-0.5) * (1.0 + 1.0 / (2.0 * gh)) * (-gh).exp();
    let i3_bound = 8.0 * b * rho.powf(nf) / (cfg.delta_smooth * q.delta);
    let i3_bound_eta = 8.0 * b * eta.powf(nf) * nf;

    let integrand = Integrand {
        dist,
        n: q.n,
        x: q.x,
        width: q.delta,
        delta_smooth: cfg.delta_smooth,
        smoothing: Smoothing::Minus,
    };
    let lambda = solve_truncation(&integrand, cfg)?.max(h2);
    let h = cfg.step_rule.initial_step(q.n, q.x) / 16.0;
    let f = |l: f64| integrand.eval(l);
    let two_sided = |a: f64, b: f64| simpson(f, a, b, h) + simpson(f, -b, -a, h);

    let i1 = simpson(f, -edge1.min(h2), edge1.min(h2), h);
    let i2 = two_sided(edge1.min(h2), h2);
    let i3 = two_sided(h2, lambda);

    let m = |l: f64| integrand.modulus(l);
    let i2_observed = 2.0 * simpson(m, edge1.min(h2), h2, h);
    let i3_observed = 2.0 * simpson(m, h2, lambda, h) + integrand.abs_tail(lambda);

    Ok(RegionDiagnostics {
        h1,
        h2,
        g,
        rho,
        q: q_floor,
        eta,
        i1,
        i2,
        i3,
        i2_bound,
        i3_bound,
        i3_bound_eta,
        i2_observed,
        i3_observed,
        lambda_trunc: lambda,
    })
}

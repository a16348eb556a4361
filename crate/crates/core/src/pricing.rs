//! Payoffs, Monte-Carlo pricing with error bars, and the parity and
//! symmetry identities for vanilla, binary, gap and power options.
//!
//! Terminal prices are `S_T = F ∘ η` for a forward vector `F` and a
//! positive random vector `η`. All identities are evaluated undiscounted;
//! discounting is applied to reported prices only.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dist::{draw, Law, SampleMatrix, ScalarModel};
use crate::error::{check_index, domain, Error, Result};
use crate::rng::RngStream;
use crate::special::{black_call, black_put, norm_cdf};
use crate::stats::{Estimate, Running};

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named user payoff.
#[derive(Clone)]
pub struct CustomPayoff {
    pub name: String,
    pub f: PayoffFn,
}

impl fmt::Debug for CustomPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomPayoff({})", self.name)
    }
}

/// Payoffs on a terminal price vector. Asset indices are 1-based.
#[derive(Debug, Clone)]
pub enum Payoff {
    /// `(u·S − k)_+`
    BasketCall { u: Vec<f64>, k: f64 },
    /// `(k − u·S)_+`
    BasketPut { u: Vec<f64>, k: f64 },
    /// `max(u0, u_1 S_1, …, u_n S_n)`
    MaxOption { u0: f64, u: Vec<f64> },
    /// `1{S_j > k}`
    BinaryCall { k: f64, j: usize },
    /// `1{S_j < k}`
    BinaryPut { k: f64, j: usize },
    /// `S_j 1{S_j > k}`
    GapCall { k: f64, j: usize },
    /// `S_j 1{S_j < k}`
    GapPut { k: f64, j: usize },
    /// `(long·S − short·S − k)_+`
    SpreadCall { long: Vec<f64>, short: Vec<f64>, k: f64 },
    /// `(u·S − k)_+^α`
    PowerCall { u: Vec<f64>, k: f64, alpha: f64 },
    /// `u0 + u·S`
    Linear { u0: f64, u: Vec<f64> },
    /// `(S_i − k) + min(S_j, S_i − k)`
    ForwardMinLeg { i: usize, j: usize, k: f64 },
    /// `(S_j/h)^p · inner(S)`
    PowerWeighted { j: usize, h: f64, p: f64, inner: Box<Payoff> },
    /// `c · inner(S)`
    Scaled { c: f64, inner: Box<Payoff> },
    Sum(Vec<Payoff>),
    Custom(CustomPayoff),
}

fn dot(u: &[f64], s: &[f64]) -> f64 {
    u.iter().zip(s).map(|(a, b)| a * b).sum()
}

impl Payoff {
    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Payoff::Custom(CustomPayoff {
            name: name.into(),
            f: Arc::new(f),
        })
    }

    pub fn call(k: f64) -> Self {
        Payoff::BasketCall { u: vec![1.0], k }
    }

    pub fn put(k: f64) -> Self {
        Payoff::BasketPut { u: vec![1.0], k }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            Payoff::BasketCall { u, k } => (dot(u, s) - k).max(0.0),
            Payoff::BasketPut { u, k } => (k - dot(u, s)).max(0.0),
            Payoff::MaxOption { u0, u } => u.iter().zip(s).fold(*u0, |m, (a, b)| m.max(a * b)),
            Payoff::BinaryCall { k, j } => (s[j - 1] > *k) as u8 as f64,
            Payoff::BinaryPut { k, j } => (s[j - 1] < *k) as u8 as f64,
            Payoff::GapCall { k, j } => {
                if s[j - 1] > *k {
                    s[j - 1]
                } else {
                    0.0
                }
            }
            Payoff::GapPut { k, j } => {
                if s[j - 1] < *k {
                    s[j - 1]
                } else {
                    0.0
                }
            }
            Payoff::SpreadCall { long, short, k } => (dot(long, s) - dot(short, s) - k).max(0.0),
            Payoff::PowerCall { u, k, alpha } => (dot(u, s) - k).max(0.0).powf(*alpha),
            Payoff::Linear { u0, u } => u0 + dot(u, s),
            Payoff::ForwardMinLeg { i, j, k } => {
                let d = s[i - 1] - k;
                d + s[j - 1].min(d)
            }
            Payoff::PowerWeighted { j, h, p, inner } => {
                let v = inner.eval(s);
                if v == 0.0 {
                    0.0
                } else {
                    (s[j - 1] / h).powf(*p) * v
                }
            }
            Payoff::Scaled { c, inner } => c * inner.eval(s),
            Payoff::Sum(parts) => parts.iter().map(|p| p.eval(s)).sum(),
            Payoff::Custom(c) => (c.f)(s),
        }
    }

    /// Checks weights, strikes and asset indices against dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let weights = |u: &[f64]| -> Result<()> {
            if u.len() != n {
                return Err(Error::Dimension { expected: n, got: u.len() });
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(domain("payoff weights must be finite"));
            }
            Ok(())
        };
        let strike = |k: f64| -> Result<()> {
            if k.is_finite() && k >= 0.0 {
                Ok(())
            } else {
                Err(domain(format!("strike must be finite and nonnegative, got {k}")))
            }
        };
        match self {
            Payoff::BasketCall { u, k } | Payoff::BasketPut { u, k } => {
                weights(u)?;
                strike(*k)
            }
            Payoff::MaxOption { u0, u } => {
                weights(u)?;
                if u0.is_finite() {
                    Ok(())
                } else {
                    Err(domain("u0 must be finite"))
                }
            }
            Payoff::BinaryCall { k, j } | Payoff::BinaryPut { k, j } | Payoff::GapCall { k, j } | Payoff::GapPut { k, j } => {
                check_index(*j, n)?;
                strike(*k)
            }
            Payoff::SpreadCall { long, short, k } => {
                weights(long)?;
                weights(short)?;
                strike(*k)
            }
            Payoff::PowerCall { u, k, alpha } => {
                weights(u)?;
                strike(*k)?;
                if *alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(domain("power must be positive"))
                }
            }
            Payoff::Linear { u, .. } => weights(u),
            Payoff::ForwardMinLeg { i, j, k } => {
                check_index(*i, n)?;
                check_index(*j, n)?;
                strike(*k)
            }
            Payoff::PowerWeighted { j, h, inner, .. } => {
                check_index(*j, n)?;
                if !(*h > 0.0) {
                    return Err(domain("barrier level must be positive"));
                }
                inner.validate(n)
            }
            Payoff::Scaled { inner, .. } => inner.validate(n),
            Payoff::Sum(parts) => parts.iter().try_for_each(|p| p.validate(n)),
            Payoff::Custom(_) => Ok(()),
        }
    }

    /// Growth order in `S`, used for moment checks; `None` if unknown.
    pub fn growth_order(&self) -> Option<f64> {
        match self {
            Payoff::BinaryCall { .. } | Payoff::BinaryPut { .. } | Payoff::GapPut { .. } | Payoff::BasketPut { .. } => Some(0.0),
            Payoff::PowerCall { alpha, .. } => Some(*alpha),
            Payoff::PowerWeighted { p, inner, .. } => inner.growth_order().map(|g| g + p.max(0.0)),
            Payoff::Scaled { inner, .. } => inner.growth_order(),
            Payoff::Sum(parts) => parts.iter().map(|p| p.growth_order()).try_fold(0.0f64, |m, g| g.map(|g| m.max(g))),
            Payoff::Custom(_) => None,
            _ => Some(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceMethod {
    ClosedForm,
    MonteCarlo,
}

/// Undiscounted and discounted price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub discount: f64,
    pub discounted: f64,
    pub discounted_std_error: f64,
    pub method: PriceMethod,
}

impl PriceEstimate {
    fn new(e: Estimate, n_samples: usize, discount: f64, method: PriceMethod) -> Self {
        Self {
            value: e.value,
            std_error: e.std_error,
            n_samples,
            discount,
            discounted: discount * e.value,
            discounted_std_error: discount * e.std_error,
            method,
        }
    }
}

/// Linear call `(w S − k)_+` for log-normal `S` with mean `f`.
fn linear_call(w: f64, k: f64, f: f64, s: f64) -> f64 {
    if w > 0.0 {
        w * black_call(f, k / w, s)
    } else if w < 0.0 {
        -w * black_put(f, k / w, s)
    } else {
        (-k).max(0.0)
    }
}

/// Closed form of `E payoff(F η)` for a log-normal scalar `η`.
fn lognormal_closed_form(payoff: &Payoff, forward: f64, mu: f64, sigma: f64) -> Option<f64> {
    let f = forward * (mu + 0.5 * sigma * sigma).exp();
    let d1 = |k: f64| ((f / k).ln() + 0.5 * sigma * sigma) / sigma;
    Some(match payoff {
        Payoff::BasketCall { u, k } => linear_call(u[0], *k, f, sigma),
        Payoff::BasketPut { u, k } => linear_call(-u[0], -k, f, sigma),
        Payoff::MaxOption { u0, u } => u0 + linear_call(u[0], *u0, f, sigma),
        Payoff::BinaryCall { k, .. } => {
            if *k <= 0.0 {
                1.0
            } else {
                norm_cdf(d1(*k) - sigma)
            }
        }
        Payoff::BinaryPut { k, .. } => {
            if *k <= 0.0 {
                0.0
            } else {
                norm_cdf(sigma - d1(*k))
            }
        }
        Payoff::GapCall { k, .. } => {
            if *k <= 0.0 {
                f
            } else {
                f * norm_cdf(d1(*k))
            }
        }
        Payoff::GapPut { k, .. } => {
            if *k <= 0.0 {
                0.0
            } else {
                f * norm_cdf(-d1(*k))
            }
        }
        Payoff::Linear { u0, u } => u0 + u[0] * f,
        Payoff::Scaled { c, inner } => c * lognormal_closed_form(inner, forward, mu, sigma)?,
        Payoff::Sum(parts) => parts
            .iter()
            .map(|p| lognormal_closed_form(p, forward, mu, sigma))
            .sum::<Option<f64>>()?,
        _ => return None,
    })
}

fn check_integrable<L: Law + ?Sized>(law: &L, payoff: &Payoff) -> Result<()> {
    if let (Some(m), Some(g)) = (law.as_scalar(), payoff.growth_order()) {
        if g > 0.0 {
            m.check_moment(g)?;
        }
    }
    Ok(())
}

fn scaled_rows<'a>(samples: &'a SampleMatrix, forward: &'a [f64]) -> impl Iterator<Item = Vec<f64>> + 'a {
    samples.rows().map(move |x| x.iter().zip(forward).map(|(a, b)| a * b).collect())
}

/// Price of `payoff(F ∘ η)` on pre-drawn `η` samples.
pub fn price_on_samples(samples: &SampleMatrix, forward: &[f64], payoff: &Payoff, r: f64, t: f64) -> Result<PriceEstimate> {
    payoff.validate_soft(samples.dim())?;
    let mut acc = Running::default();
    for s in scaled_rows(samples, forward) {
        acc.push(payoff.eval(&s));
    }
    Ok(PriceEstimate::new(acc.estimate(), samples.len(), (-r * t).exp(), PriceMethod::MonteCarlo))
}

impl Payoff {
    // strikes may be negative in symmetry identities; only shapes are checked
    fn validate_soft(&self, n: usize) -> Result<()> {
        match self.validate(n) {
            Err(Error::Domain(msg)) if msg.starts_with("strike") => Ok(()),
            other => other,
        }
    }
}

/// `E payoff(F ∘ η)` with its standard error; closed form for scalar
/// log-normal vanilla, binary and gap payoffs.
pub fn price<L: Law + ?Sized>(
    law: &L,
    forward: &[f64],
    payoff: &Payoff,
    r: f64,
    t: f64,
    rng: &mut RngStream,
    n_samples: usize,
) -> Result<PriceEstimate> {
    if forward.len() != law.dim() {
        return Err(Error::Dimension {
            expected: law.dim(),
            got: forward.len(),
        });
    }
    payoff.validate_soft(law.dim())?;
    check_integrable(law, payoff)?;
    let disc = (-r * t).exp();
    if let Some(ScalarModel::LogNormal { mu, sigma }) = law.as_scalar() {
        if let Some(v) = lognormal_closed_form(payoff, forward[0], *mu, *sigma) {
            return Ok(PriceEstimate::new(Estimate::exact(v), 0, disc, PriceMethod::ClosedForm));
        }
    }
    let samples = draw(law, n_samples, rng)?;
    price_on_samples(&samples, forward, payoff, r, t)
}

fn scalar_lognormal<L: Law + ?Sized>(law: &L) -> Option<(f64, f64)> {
    match law.as_scalar() {
        Some(ScalarModel::LogNormal { mu, sigma }) => Some((*mu, *sigma)),
        _ => None,
    }
}

fn require_scalar<L: Law + ?Sized>(law: &L) -> Result<()> {
    if law.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: law.dim() });
    }
    Ok(())
}

/// Per-sample differences of two payoffs of `F η` on common draws.
fn crn<L: Law + ?Sized>(
    law: &L,
    rng: &mut RngStream,
    n: usize,
    f: impl Fn(f64) -> f64,
) -> Result<Estimate> {
    let samples = draw(law, n, rng)?;
    let mut acc = Running::default();
    for x in samples.rows() {
        acc.push(f(x[0]));
    }
    Ok(acc.estimate())
}

/// `c(k,F) − p(k,F) − (F − k)` undiscounted, on common random numbers.
pub fn parity_residual<L: Law + ?Sized>(law: &L, k: f64, forward: f64, rng: &mut RngStream, n: usize) -> Result<Estimate> {
    require_scalar(law)?;
    check_integrable(law, &Payoff::call(k))?;
    if let Some((mu, s)) = scalar_lognormal(law) {
        let f = forward * (mu + 0.5 * s * s).exp();
        return Ok(Estimate::exact(black_call(f, k, s) - black_put(f, k, s) - (forward - k)));
    }
    crn(law, rng, n, |x| {
        let st = forward * x;
        (st - k).max(0.0) - (k - st).max(0.0) - (forward - k)
    })
}

/// Vanilla symmetry residuals `[c(k,F) + k − c(F,k) − F, p(k,F) − c(F,k)]`,
/// undiscounted.
pub fn vanilla_symmetry_residual<L: Law + ?Sized>(law: &L, k: f64, forward: f64, rng: &mut RngStream, n: usize) -> Result<[Estimate; 2]> {
    require_scalar(law)?;
    check_integrable(law, &Payoff::call(k))?;
    if let Some((mu, s)) = scalar_lognormal(law) {
        let m = (mu + 0.5 * s * s).exp();
        let c = |k: f64, f: f64| black_call(f * m, k, s);
        let p = |k: f64, f: f64| black_put(f * m, k, s);
        return Ok([
            Estimate::exact(c(k, forward) + k - c(forward, k) - forward),
            Estimate::exact(p(k, forward) - c(forward, k)),
        ]);
    }
    let samples = draw(law, n, rng)?;
    let mut a = Running::default();
    let mut b = Running::default();
    for x in samples.rows() {
        let x = x[0];
        let ckf = (forward * x - k).max(0.0);
        let cfk = (k * x - forward).max(0.0);
        let pkf = (k - forward * x).max(0.0);
        a.push(ckf + k - cfk - forward);
        b.push(pkf - cfk);
    }
    Ok([a.estimate(), b.estimate()])
}

/// Binary/gap residuals `[√k_c BC(k_c) − GP(k_p)/√k_p,
/// √k_p BP(k_p) − GC(k_c)/√k_c]` at `F = √(k_c k_p)`.
pub fn binary_gap_symmetry_residual<L: Law + ?Sized>(
    law: &L,
    kc: f64,
    kp: f64,
    forward: f64,
    rng: &mut RngStream,
    n: usize,
) -> Result<[Estimate; 2]> {
    require_scalar(law)?;
    if !(kc > 0.0 && kp > 0.0) {
        return Err(domain("binary strikes must be positive"));
    }
    let g = (kc * kp).sqrt();
    if (forward - g).abs() > 1e-12 * g {
        return Err(Error::GeometryViolation(format!("forward {forward} is not the geometric mean {g} of the strikes")));
    }
    let (sc, sp) = (kc.sqrt(), kp.sqrt());
    if let Some((mu, s)) = scalar_lognormal(law) {
        let cf = |p: Payoff| lognormal_closed_form(&p, forward, mu, s).expect("closed form");
        let bc = cf(Payoff::BinaryCall { k: kc, j: 1 });
        let gp = cf(Payoff::GapPut { k: kp, j: 1 });
        let bp = cf(Payoff::BinaryPut { k: kp, j: 1 });
        let gc = cf(Payoff::GapCall { k: kc, j: 1 });
        return Ok([Estimate::exact(sc * bc - gp / sp), Estimate::exact(sp * bp - gc / sc)]);
    }
    let samples = draw(law, n, rng)?;
    let mut a = Running::default();
    let mut b = Running::default();
    for x in samples.rows() {
        let st = forward * x[0];
        let bc = (st > kc) as u8 as f64;
        let gc = if st > kc { st } else { 0.0 };
        let bp = (st < kp) as u8 as f64;
        let gp = if st < kp { st } else { 0.0 };
        a.push(sc * bc - gp / sp);
        b.push(sp * bp - gc / sc);
    }
    Ok([a.estimate(), b.estimate()])
}

/// `E(Fη − k)_+^α − a^{−α} E(F − k a² η)_+^α` on common random numbers.
pub fn power_symmetry_residual<L: Law + ?Sized>(
    law: &L,
    a: f64,
    alpha: f64,
    forward: f64,
    k: f64,
    rng: &mut RngStream,
    n: usize,
) -> Result<Estimate> {
    require_scalar(law)?;
    if !(a > 0.0 && alpha > 0.0) {
        return Err(domain("power symmetry needs a > 0 and alpha > 0"));
    }
    if let Some(m) = law.as_scalar() {
        m.check_moment(alpha)?;
    }
    let c = a.powf(-alpha);
    crn(law, rng, n, |x| {
        (forward * x - k).max(0.0).powf(alpha) - c * (forward - k * a * a * x).max(0.0).powf(alpha)
    })
}

/// `E f(Fη) − E[f(F/η) η]` on common random numbers.
pub fn general_symmetry_residual<L: Law + ?Sized>(
    law: &L,
    f: impl Fn(f64) -> f64,
    forward: f64,
    rng: &mut RngStream,
    n: usize,
) -> Result<Estimate> {
    require_scalar(law)?;
    crn(law, rng, n, |x| f(forward * x) - f(forward / x) * x)
}

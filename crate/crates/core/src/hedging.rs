//! Path simulation for exponential Lévy prices with carrying costs, barrier
//! first-hit detection, reflected semi-static hedge claims and nested
//! Monte-Carlo replication diagnostics.
//!
//! Prices follow `S_t = S0 ∘ exp(tλ + ξ_t)` where `ξ` is a Lévy process with
//! `E e^{ξ_{t,j}} = 1`. A barrier on asset `i` at level `H` is hit at the
//! first grid time whose price `S_{t,i}` lies on the far side of `H` from
//! `S0_i` (or on `H`).

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::MultiLogNormal;
use crate::error::{check_index, domain, Error, Result};
use crate::levy::{check_qsd_triplet, martingale_drift, solve_alpha, Convention, JumpMeasure, LevyTriplet};
use crate::pricing::Payoff;
use crate::report::{Bands, ReportBuilder, SymmetryReport, Verdict};
use crate::rng::RngStream;
use crate::stats::{Estimate, Running};

/// Simulation setup for `S_t = S0 ∘ e^{tλ + ξ_t}` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct PathConfig {
    s0: Vec<f64>,
    lambda: Vec<f64>,
    driver: LevyTriplet,
    horizon: f64,
    steps: usize,
    bridge: bool,
}

impl PathConfig {
    pub fn new(s0: Vec<f64>, lambda: Vec<f64>, driver: LevyTriplet, horizon: f64, steps: usize) -> Result<Self> {
        let n = driver.dim();
        for v in [&s0, &lambda] {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        if s0.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(domain("initial prices must be positive"));
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(domain("carrying costs must be finite"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(domain("horizon must be positive"));
        }
        if steps == 0 {
            return Err(domain("steps must be at least 1"));
        }
        for j in 1..=n {
            let want = martingale_drift(&driver, j)?;
            let have = driver.drift()[j - 1];
            if (want - have).abs() > 1e-10 * (1.0 + want.abs()) {
                return Err(Error::InvalidModel(format!(
                    "component {j} of the driver is not a martingale: drift {have}, required {want}"
                )));
            }
        }
        Ok(Self {
            s0,
            lambda,
            driver,
            horizon,
            steps,
            bridge: false,
        })
    }

    /// Driver from a log-normal law of `η_1`: Gaussian with covariance
    /// `cov` and mean `mu` per unit time.
    pub fn from_lognormal(s0: Vec<f64>, lambda: Vec<f64>, law: &MultiLogNormal, horizon: f64, steps: usize) -> Result<Self> {
        let n = law.dim();
        let driver = LevyTriplet::new(law.cov().clone(), JumpMeasure::zero(n), law.mu().clone(), Convention::Mean)?;
        Self::new(s0, lambda, driver, horizon, steps)
    }

    /// Enables the Brownian-bridge crossing correction. Only steps without
    /// jumps are corrected.
    pub fn with_bridge_correction(mut self, on: bool) -> Self {
        self.bridge = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn driver(&self) -> &LevyTriplet {
        &self.driver
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn bridge(&self) -> bool {
        self.bridge
    }

    pub fn has_jumps(&self) -> bool {
        !self.driver.nu().is_zero()
    }

    /// Exact draw of `S_{t+r}` given `S_t = s`.
    fn advance(&self, s: &[f64], r: f64, rng: &mut RngStream, out: &mut [f64]) -> Result<u64> {
        let jumps = self.driver.sample_increment_into(r, rng, out)?;
        for j in 0..s.len() {
            out[j] = s[j] * (self.lambda[j] * r + out[j]).exp();
        }
        Ok(jumps)
    }
}

/// One simulated price path on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    dt: f64,
    prices: Vec<f64>,
    jumps: Vec<bool>,
}

impl Path {
    /// Builds a path from grid prices (row per time) and per-step jump
    /// flags.
    pub fn new(dim: usize, dt: f64, prices: Vec<f64>, jumps: Vec<bool>) -> Result<Self> {
        if dim == 0 || !prices.len().is_multiple_of(dim) || prices.len() / dim != jumps.len() + 1 {
            return Err(domain("path needs steps+1 price rows and one jump flag per step"));
        }
        Ok(Self { dim, dt, prices, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.jumps.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn at(&self, step: usize) -> &[f64] {
        &self.prices[step * self.dim..(step + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.steps())
    }

    /// Whether a jump occurred in step `k` (from grid time `k−1` to `k`).
    pub fn jumped(&self, k: usize) -> bool {
        self.jumps[k - 1]
    }
}

fn simulate_one(cfg: &PathConfig, rng: &mut RngStream) -> Result<Path> {
    let n = cfg.dim();
    let dt = cfg.dt();
    let mut prices = Vec::with_capacity((cfg.steps + 1) * n);
    prices.extend_from_slice(&cfg.s0);
    let mut jumps = Vec::with_capacity(cfg.steps);
    let mut next = vec![0.0; n];
    for k in 0..cfg.steps {
        let prev = prices[k * n..(k + 1) * n].to_vec();
        let count = cfg.advance(&prev, dt, rng, &mut next)?;
        prices.extend_from_slice(&next);
        jumps.push(count > 0);
    }
    Ok(Path { dim: n, dt, prices, jumps })
}

fn path_stream(rng: &RngStream, id: usize) -> RngStream {
    rng.child(id as u64)
}

/// Simulates `n_paths` paths. Path `k` uses its own child stream, so the
/// result does not depend on the thread count.
pub fn simulate_paths(cfg: &PathConfig, n_paths: usize, rng: &mut RngStream) -> Result<Vec<Path>> {
    let base = rng.child(0x9A7B);
    (0..n_paths)
        .into_par_iter()
        .map(|id| simulate_one(cfg, &mut path_stream(&base, id)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
}

/// Barrier on asset `i` (1-based) at level `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Barrier {
    pub i: usize,
    pub h: f64,
    pub direction: Direction,
}

impl Barrier {
    /// Direction is inferred from `S0_i`, which must differ from `h`.
    pub fn new(i: usize, h: f64, s0: &[f64]) -> Result<Self> {
        check_index(i, s0.len())?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(domain("barrier level must be positive"));
        }
        let x = s0[i - 1];
        let direction = if x > h {
            Direction::Down
        } else if x < h {
            Direction::Up
        } else {
            return Err(domain(format!("initial price of asset {i} equals the barrier {h}")));
        };
        Ok(Self { i, h, direction })
    }

    /// `H ∈ Ξ_{ti}`: the price is on the barrier or beyond it.
    pub fn knocked(&self, s: &[f64]) -> bool {
        let x = s[self.i - 1];
        match self.direction {
            Direction::Down => x <= self.h,
            Direction::Up => x >= self.h,
        }
    }
}

/// First grid time at which the barrier is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitRecord {
    pub step: usize,
    /// `S_{τ,i}`: the barrier level unless a jump carried the price past it.
    pub value: f64,
    pub overshoot: bool,
}

/// Grid rule: the first step whose endpoint lies on or beyond `H`. On
/// steps without a jump the path is continuous, so it passed through `H`
/// and the hit value is `H`.
pub fn detect_first_hit(path: &Path, barrier: &Barrier) -> Option<HitRecord> {
    (1..=path.steps()).find(|&k| barrier.knocked(path.at(k))).map(|k| hit_at(path, barrier, k))
}

fn hit_at(path: &Path, barrier: &Barrier, k: usize) -> HitRecord {
    let x = path.at(k)[barrier.i - 1];
    if path.jumped(k) && x != barrier.h {
        HitRecord {
            step: k,
            value: x,
            overshoot: true,
        }
    } else {
        HitRecord {
            step: k,
            value: barrier.h,
            overshoot: false,
        }
    }
}

/// Grid rule plus the Brownian-bridge crossing probability
/// `exp(−2 ln(S_a/H) ln(S_b/H) / (a_ii Δt))` on jump-free steps whose
/// endpoints both stay on the initial side. `a_ii` is the diffusion
/// variance rate of asset `i`.
pub fn detect_first_hit_bridge(path: &Path, barrier: &Barrier, a_ii: f64, rng: &mut RngStream) -> Option<HitRecord> {
    let i = barrier.i - 1;
    for k in 1..=path.steps() {
        if barrier.knocked(path.at(k)) {
            return Some(hit_at(path, barrier, k));
        }
        if a_ii > 0.0 && !path.jumped(k) {
            let la = (path.at(k - 1)[i] / barrier.h).ln();
            let lb = (path.at(k)[i] / barrier.h).ln();
            let p = (-2.0 * la * lb / (a_ii * path.dt())).exp();
            if rng.open01() < p {
                return Some(HitRecord {
                    step: k,
                    value: barrier.h,
                    overshoot: false,
                });
            }
        }
    }
    None
}

fn first_hit(cfg: &PathConfig, path: &Path, barrier: &Barrier, rng: &mut RngStream) -> Option<HitRecord> {
    if cfg.bridge {
        let a = cfg.driver.a()[(barrier.i - 1, barrier.i - 1)];
        detect_first_hit_bridge(path, barrier, a, rng)
    } else {
        detect_first_hit(path, barrier)
    }
}

fn weighted(i: usize, h: f64, p: f64, inner: Payoff) -> Payoff {
    match inner {
        Payoff::PowerWeighted { j, h: h2, p: q, inner } if j == i && h2 == h => weighted(i, h, p + q, *inner),
        other if p == 0.0 => other,
        other => Payoff::PowerWeighted {
            j: i,
            h,
            p,
            inner: Box::new(other),
        },
    }
}

/// Reflected weights `u'` with `u'_i = c` and `u'_j = −u_j` elsewhere.
fn flipped(u: &[f64], i: usize, c: f64) -> Vec<f64> {
    u.iter().enumerate().map(|(j, &v)| if j == i - 1 { c } else { -v }).collect()
}

/// `(S_i/H)^{α−1}` times the payoff `(S_i/H) f(κ̂_i(S, H))`, built
/// symbolically where the family is closed under reflection.
fn reflect_unweighted(f: &Payoff, i: usize, h: f64, alpha: f64) -> Result<Payoff> {
    let need = |u: &[f64]| if u.len() < i { Err(Error::Index { index: i, dim: u.len() }) } else { Ok(()) };
    Ok(match f {
        Payoff::BasketCall { u, k } => {
            need(u)?;
            Payoff::BasketPut {
                u: flipped(u, i, k / h),
                k: u[i - 1] * h,
            }
        }
        Payoff::BasketPut { u, k } => {
            need(u)?;
            Payoff::BasketCall {
                u: flipped(u, i, k / h),
                k: u[i - 1] * h,
            }
        }
        Payoff::SpreadCall { long, short, k } => {
            if long.len() != short.len() {
                return Err(Error::Dimension {
                    expected: long.len(),
                    got: short.len(),
                });
            }
            let u: Vec<f64> = long.iter().zip(short).map(|(a, b)| a - b).collect();
            return reflect_unweighted(&Payoff::BasketCall { u, k: *k }, i, h, alpha);
        }
        Payoff::Linear { u0, u } => {
            need(u)?;
            let mut v = u.clone();
            v[i - 1] = u0 / h;
            Payoff::Linear { u0: u[i - 1] * h, u: v }
        }
        Payoff::Scaled { c, inner } => Payoff::Scaled {
            c: *c,
            inner: Box::new(reflect_claim(inner, i, h, alpha)?),
        },
        Payoff::Sum(parts) => Payoff::Sum(parts.iter().map(|p| reflect_claim(p, i, h, alpha)).collect::<Result<_>>()?),
        Payoff::PowerWeighted { j, h: h2, p, inner } if *j == i && *h2 == h => {
            return Ok(weighted(i, h, -p, reflect_claim(inner, i, h, alpha)?));
        }
        other => {
            let f = other.clone();
            let k = i - 1;
            return Ok(Payoff::custom(format!("reflected[{i}, {h}, {alpha}]"), move |s: &[f64]| {
                let r = h / s[k];
                let mut t: Vec<f64> = s.iter().map(|x| x * r).collect();
                t[k] = h * r;
                let v = f.eval(&t);
                if v == 0.0 {
                    0.0
                } else {
                    (s[k] / h).powf(alpha) * v
                }
            }));
        }
    })
    .map(|g| weighted(i, h, alpha - 1.0, g))
}

/// `g(S) = (S_i/H)^α f(κ̂_i(S, H))` with `κ̂_i(S, H) = (H/S_i)(S_1, …, H, …, S_n)`.
/// Basket calls and puts, spreads and linear claims map to weighted basket
/// puts, calls and linear claims; other payoffs are wrapped pointwise.
pub fn reflect_claim(f: &Payoff, i: usize, h: f64, alpha: f64) -> Result<Payoff> {
    if i == 0 {
        return Err(Error::Index { index: 0, dim: 0 });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(domain("barrier level must be positive"));
    }
    if !alpha.is_finite() {
        return Err(domain("α must be finite"));
    }
    reflect_unweighted(f, i, h, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Knock {
    In,
    Out,
}

/// How the knock-in hedge claim was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeForm {
    /// The target vanishes beyond the barrier and the reflection vanishes
    /// before it, so the reflected claim alone replicates.
    Reflected,
    /// `(S_i − k) + min(S_j, S_i − k)` with the barrier at `k` and `α = 1`:
    /// the target minus a basket call plus a spread put.
    ForwardMinLeg,
    /// `(f(S) + g(S) 1{S_i ≠ H}) 1{H ∈ Ξ_i}` evaluated pointwise.
    Indicator,
    /// Pure reflected claim held against a knock-in basket call.
    SuperHedge,
}

#[derive(Debug, Clone)]
pub struct HedgePlan {
    pub target: Payoff,
    pub knock: Knock,
    pub barrier: Barrier,
    pub alpha: f64,
    pub form: HedgeForm,
    /// The knock-in replicating claim.
    pub knock_in_hedge: Payoff,
    /// The claim held: the knock-in hedge, or the target minus it for a
    /// knock-out.
    pub hedge: Payoff,
    pub notes: Vec<String>,
}

fn as_basket_call(f: &Payoff) -> Option<(Vec<f64>, f64)> {
    match f {
        Payoff::BasketCall { u, k } => Some((u.clone(), *k)),
        Payoff::SpreadCall { long, short, k } if long.len() == short.len() => {
            Some((long.iter().zip(short).map(|(a, b)| a - b).collect(), *k))
        }
        _ => None,
    }
}

fn others<'a>(u: &'a [f64], i: usize) -> impl Iterator<Item = f64> + 'a {
    u.iter().enumerate().filter(move |(j, _)| *j != i - 1).map(|(_, v)| *v)
}

fn indicator_form(target: &Payoff, barrier: Barrier, reflected: Payoff) -> Payoff {
    let f = target.clone();
    let (i, h) = (barrier.i, barrier.h);
    Payoff::custom(format!("knock-in hedge[{i}, {h}]"), move |s: &[f64]| {
        if !barrier.knocked(s) {
            return 0.0;
        }
        let g = if s[i - 1] == h { 0.0 } else { reflected.eval(s) };
        f.eval(s) + g
    })
}

/// Semi-static hedge for the knock-in or knock-out version of `target`.
///
/// The knock-in claim is `(f(S_T) + g(S_T) 1{S_{T,i} ≠ H}) 1{H ∈ Ξ_{T,i}}`
/// with `g` the reflection of `f`. Indicator-free forms are used for
/// basket calls and spreads behind a down barrier with `u_j ≤ 0 (j ≠ i)`
/// and `u_i H ≤ k`, basket puts behind an up barrier with `u_j ≥ 0` and
/// `u_i H ≥ k`, and the forward-min leg with the barrier at its strike
/// under `α = 1`.
pub fn build_hedge(target: &Payoff, barrier: Barrier, alpha: f64, knock: Knock) -> Result<HedgePlan> {
    let (i, h) = (barrier.i, barrier.h);
    let reflected = reflect_claim(target, i, h, alpha)?;
    let mut notes = Vec::new();
    let basket = as_basket_call(target);
    let (form, knock_in_hedge) = match (target, basket) {
        (_, Some((u, k))) if barrier.direction == Direction::Down && u.len() >= i && others(&u, i).all(|v| v <= 0.0) && u[i - 1] * h <= k => {
            (HedgeForm::Reflected, reflected)
        }
        (Payoff::BasketPut { u, k }, _) if barrier.direction == Direction::Up && u.len() >= i && others(u, i).all(|v| v >= 0.0) && u[i - 1] * h >= *k => {
            (HedgeForm::Reflected, reflected)
        }
        (Payoff::ForwardMinLeg { i: fi, j, k }, _) if *fi == i && *j != i && *k == h && barrier.direction == Direction::Down && alpha == 1.0 => {
            let n = i.max(*j);
            let mut plus = vec![0.0; n];
            plus[i - 1] = 1.0;
            plus[j - 1] = 1.0;
            let mut minus = plus.clone();
            minus[j - 1] = -1.0;
            let hedge = Payoff::Sum(vec![
                target.clone(),
                Payoff::Scaled {
                    c: -1.0,
                    inner: Box::new(Payoff::BasketCall { u: plus, k: *k }),
                },
                Payoff::BasketPut { u: minus, k: *k },
            ]);
            (HedgeForm::ForwardMinLeg, hedge)
        }
        _ => {
            notes.push(
                Error::UnsupportedSimplification("no indicator-free form for this target and barrier; using the general indicator claim".into())
                    .to_string(),
            );
            (HedgeForm::Indicator, indicator_form(target, barrier, reflected))
        }
    };
    let hedge = match knock {
        Knock::In => knock_in_hedge.clone(),
        Knock::Out => Payoff::Sum(vec![
            target.clone(),
            Payoff::Scaled {
                c: -1.0,
                inner: Box::new(knock_in_hedge.clone()),
            },
        ]),
    };
    Ok(HedgePlan {
        target: target.clone(),
        knock,
        barrier,
        alpha,
        form,
        knock_in_hedge,
        hedge,
        notes,
    })
}

/// Super-hedge of a knock-in basket call or spread: hold the reflected
/// claim, exchange it for the call at the hit.
pub fn build_super_hedge(target: &Payoff, barrier: Barrier, alpha: f64) -> Result<HedgePlan> {
    let (u, k) = as_basket_call(target).ok_or_else(|| Error::UnsupportedSimplification("super-hedge needs a basket call or spread target".into()))?;
    if u.len() < barrier.i || !(u[barrier.i - 1] > 0.0) {
        return Err(domain("super-hedge needs a positive weight on the barrier asset"));
    }
    if !(k >= 0.0) {
        return Err(domain("strike must be nonnegative"));
    }
    let g = reflect_claim(target, barrier.i, barrier.h, alpha)?;
    Ok(HedgePlan {
        target: target.clone(),
        knock: Knock::In,
        barrier,
        alpha,
        form: HedgeForm::SuperHedge,
        knock_in_hedge: g.clone(),
        hedge: g,
        notes: Vec::new(),
    })
}

/// Monte-Carlo sizes and bands for hedge evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeSettings {
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_states: usize,
    pub bands: Bands,
}

impl Default for HedgeSettings {
    fn default() -> Self {
        Self {
            n_outer: 10_000,
            n_inner: 20_000,
            n_states: 50,
            bands: Bands {
                se_band: 3.0,
                exact_tol: 1e-12,
                resolution_floor: 0.05,
            },
        }
    }
}

/// Conditional values at one first-hit state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitGap {
    pub label: String,
    pub path: usize,
    pub step: usize,
    pub time: f64,
    pub state: Vec<f64>,
    pub overshoot: bool,
    /// Value of the barrier claim from the hit onward.
    pub target: Estimate,
    /// Value of the hedge claim from the hit onward.
    pub hedge: Estimate,
    /// `hedge − target` under common random numbers.
    pub gap: Estimate,
    pub gap_in_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgePrices {
    pub knock_in: Estimate,
    pub knock_out: Estimate,
    pub plain: Estimate,
    /// Initial cost of the hedge claim.
    pub hedge: Estimate,
    /// Hedge cost minus barrier-claim value, pathwise.
    pub hedge_minus_claim: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgeReport {
    pub name: String,
    pub knock_in_fraction: Estimate,
    pub overshoot_fraction: f64,
    pub n_hits: usize,
    pub prices: HedgePrices,
    pub gaps: Vec<HitGap>,
    pub max_gap_in_se: f64,
    pub report: SymmetryReport,
    pub verdict: Verdict,
}

impl HedgeReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} (knock-in {:.4} ± {:.4}, {} hit states, max gap {:.2} SE, overshoot {:.4})",
            self.name,
            self.verdict,
            self.knock_in_fraction.value,
            self.knock_in_fraction.std_error,
            self.gaps.len(),
            self.max_gap_in_se,
            self.overshoot_fraction
        )
    }
}

struct OuterPath {
    id: usize,
    /// Per identity: hit record and the state at the hit.
    hits: Vec<(usize, HitRecord, Vec<f64>)>,
    knocked: bool,
    claim: f64,
    hedge: f64,
    overshoot: bool,
    /// Pathwise terminal mismatch on paths where it must vanish.
    terminal_mismatch: Option<f64>,
}

/// Two claims whose conditional values must agree after a stopping event.
struct Identity {
    label: String,
    claim: Payoff,
    hedge: Payoff,
    /// +1: hedge ≥ claim is the safe side when the identity is inexact.
    side: f64,
}

fn nested_gap(cfg: &PathConfig, id: &Identity, state: &[f64], remaining: f64, n_inner: usize, rng: &mut RngStream) -> Result<(Estimate, Estimate, Estimate)> {
    if remaining <= 1e-12 * cfg.horizon {
        let (c, h) = (id.claim.eval(state), id.hedge.eval(state));
        return Ok((Estimate::exact(c), Estimate::exact(h), Estimate::exact(h - c)));
    }
    let (mut rc, mut rh, mut rd) = (Running::default(), Running::default(), Running::default());
    let mut s = vec![0.0; state.len()];
    for _ in 0..n_inner {
        cfg.advance(state, remaining, rng, &mut s)?;
        let (c, h) = (id.claim.eval(&s), id.hedge.eval(&s));
        rc.push(c);
        rh.push(h);
        rd.push(h - c);
    }
    Ok((rc.estimate(), rh.estimate(), rd.estimate()))
}

struct Evaluation<'a> {
    name: String,
    cfg: &'a PathConfig,
    settings: HedgeSettings,
    identities: Vec<Identity>,
    one_sided: bool,
    /// Records the time-0 hedge cost against the claim one-sidedly.
    price_floor: bool,
}

impl Evaluation<'_> {
    fn run(self, outer: &(dyn Fn(usize, &mut RngStream) -> Result<OuterPath> + Sync), rng: &mut RngStream) -> Result<HedgeReport> {
        let s = self.settings;
        if s.n_outer < 2 || s.n_inner < 2 {
            return Err(domain("need at least two outer and two inner samples"));
        }
        let base = rng.child(0x0F7E);
        let nest = rng.child(0x1E57);
        let paths: Vec<OuterPath> = (0..s.n_outer).into_par_iter().map(|id| outer(id, &mut path_stream(&base, id))).collect::<Result<_>>()?;

        let mut b = ReportBuilder::new(&self.name, s.bands);
        let [mut ki, mut ko, mut pl, mut hg, mut hm, mut kf] = [Running::default(); 6];
        let mut n_over = 0usize;
        let mut mismatch: f64 = 0.0;
        let mut n_hits = 0;
        for p in &paths {
            let chi = p.knocked as u8 as f64;
            kf.push(chi);
            ki.push(p.claim * chi);
            ko.push(p.claim * (1.0 - chi));
            pl.push(p.claim);
            hg.push(p.hedge);
            hm.push(p.hedge - p.claim * chi);
            n_hits += p.knocked as usize;
            n_over += p.overshoot as usize;
            if let Some(m) = p.terminal_mismatch {
                mismatch = mismatch.max(m.abs());
            }
        }
        let prices = HedgePrices {
            knock_in: ki.estimate(),
            knock_out: ko.estimate(),
            plain: pl.estimate(),
            hedge: hg.estimate(),
            hedge_minus_claim: hm.estimate(),
        };
        b.exact_tol("terminal_no_hit", vec![], mismatch, s.bands.exact_tol * (1.0 + prices.plain.value.abs()));
        let (a, o, q) = (prices.knock_in, prices.knock_out, prices.plain);
        let se = (a.std_error.powi(2) + o.std_error.powi(2) + q.std_error.powi(2)).sqrt();
        b.mc("knock_decomposition", vec![], a.value + o.value - q.value, se, q.value);
        if self.price_floor {
            let d = prices.hedge_minus_claim;
            b.mc_lower("initial_cost_floor", vec![], d.value, d.std_error, prices.hedge.value);
        }

        // nested restarts at the first n_states hit events
        let mut jobs = Vec::new();
        'outer: for p in &paths {
            for (h_idx, (which, hit, state)) in p.hits.iter().enumerate() {
                if jobs.len() >= s.n_states {
                    break 'outer;
                }
                jobs.push((p.id, h_idx, *which, *hit, state.clone()));
            }
        }
        let cfg = self.cfg;
        let identities = &self.identities;
        let gaps: Vec<HitGap> = jobs
            .par_iter()
            .map(|(pid, h_idx, which, hit, state)| {
                let id = &identities[*which];
                let time = hit.step as f64 * cfg.dt();
                let mut r = nest.child(((*pid as u64) << 8) | *h_idx as u64);
                let (target, hedge, gap) = nested_gap(cfg, id, state, cfg.horizon - time, s.n_inner, &mut r)?;
                Ok(HitGap {
                    label: id.label.clone(),
                    path: *pid,
                    step: hit.step,
                    time,
                    state: state.clone(),
                    overshoot: hit.overshoot,
                    target,
                    hedge,
                    gap,
                    gap_in_se: gap.in_se_units(),
                })
            })
            .collect::<Result<_>>()?;
        for g in &gaps {
            let side = identities.iter().find(|i| i.label == g.label).map_or(1.0, |i| i.side);
            let mut point = vec![g.time];
            point.extend_from_slice(&g.state);
            let scale = g.target.value.abs().max(g.hedge.value.abs());
            let label = format!("hit_gap_{}", g.label);
            if self.one_sided || g.overshoot {
                b.mc_lower(label, point, side * g.gap.value, g.gap.std_error, scale);
            } else {
                b.mc(label, point, g.gap.value, g.gap.std_error, scale);
            }
        }
        if gaps.len() < s.n_states {
            b.note(format!("only {} hit states available (requested {})", gaps.len(), s.n_states));
        }
        if self.one_sided {
            b.note("jump driver: hit-state gaps checked one-sided");
        }
        let report = b.finish();
        let max_gap_in_se = gaps.iter().map(|g| g.gap_in_se).filter(|v| v.is_finite()).fold(0.0, f64::max);
        Ok(HedgeReport {
            name: self.name,
            knock_in_fraction: kf.estimate(),
            overshoot_fraction: n_over as f64 / s.n_outer as f64,
            n_hits,
            prices,
            gaps,
            max_gap_in_se,
            verdict: report.verdict,
            report,
        })
    }
}

/// Nested Monte-Carlo check of a hedge plan.
///
/// Outer paths give the barrier-claim prices, the knock decomposition and
/// the terminal check on paths that never hit. At the first `n_states`
/// hits the remaining horizon is re-simulated `n_inner` times from the hit
/// state and the conditional values of target and hedge are compared.
pub fn evaluate_hedge(plan: &HedgePlan, cfg: &PathConfig, settings: &HedgeSettings, rng: &mut RngStream) -> Result<HedgeReport> {
    let n = cfg.dim();
    check_index(plan.barrier.i, n)?;
    if (cfg.s0[plan.barrier.i - 1] > plan.barrier.h) != (plan.barrier.direction == Direction::Down) {
        return Err(domain("barrier direction does not match the initial price"));
    }
    plan.target.validate(n).or_else(|e| if matches!(e, Error::Domain(_)) { Ok(()) } else { Err(e) })?;
    let jumps = cfg.has_jumps();
    let (claim_at_hit, side) = match plan.knock {
        Knock::In => (plan.target.clone(), 1.0),
        Knock::Out => (Payoff::Linear { u0: 0.0, u: vec![0.0; n] }, -1.0),
    };
    let identities = vec![Identity {
        label: "barrier".into(),
        claim: claim_at_hit,
        hedge: plan.hedge.clone(),
        side,
    }];
    let barrier = plan.barrier;
    let outer = |id: usize, r: &mut RngStream| -> Result<OuterPath> {
        let path = simulate_one(cfg, r)?;
        let hit = first_hit(cfg, &path, &barrier, r);
        let st = path.terminal().to_vec();
        let f = plan.target.eval(&st);
        let h = plan.hedge.eval(&st);
        let knocked = hit.is_some();
        let mismatch = if knocked {
            None
        } else {
            match (plan.form, plan.knock) {
                (HedgeForm::SuperHedge, _) => Some(h.min(0.0)),
                (_, Knock::In) => Some(h),
                (_, Knock::Out) => Some(h - f),
            }
        };
        let hits = hit
            .map(|rec| {
                let mut s = path.at(rec.step).to_vec();
                s[barrier.i - 1] = rec.value;
                vec![(0, rec, s)]
            })
            .unwrap_or_default();
        Ok(OuterPath {
            id,
            hits,
            knocked,
            claim: f,
            hedge: h,
            overshoot: hit.is_some_and(|r| r.overshoot),
            terminal_mismatch: mismatch,
        })
    };
    let knocked_price = plan.knock;
    let eval = Evaluation {
        name: format!("hedge[{:?}, {:?}]", plan.form, plan.knock),
        cfg,
        settings: *settings,
        identities,
        one_sided: jumps,
        price_floor: plan.form == HedgeForm::SuperHedge,
    };
    let mut rep = eval.run(&outer, rng)?;
    if knocked_price == Knock::Out {
        // for a knock-out the claim is paid on paths that never hit
        let d = rep.prices;
        rep.prices.hedge_minus_claim = Estimate {
            value: d.hedge.value - d.knock_out.value,
            std_error: (d.hedge.std_error.powi(2) + d.knock_out.std_error.powi(2)).sqrt(),
        };
    }
    Ok(rep)
}

/// The two multi-asset claims of the joint-hedging example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JointClaim {
    /// Down barriers at `k` on both assets: at the first hit by asset `j`
    /// the holder receives the spread call on `S_j − S_other` struck at `k`.
    X { k: f64 },
    /// Up barriers at `k`: a basket put `(k − S1 − S2)_+` paid with sign
    /// `+1` if only asset 1 hit, `−1` if only asset 2 hit, else nothing.
    Y { k: f64 },
}

#[derive(Debug, Clone)]
pub struct JointHedgePlan {
    pub claim: JointClaim,
    pub alphas: [f64; 2],
    pub hedge: Payoff,
}

fn spread(sign: f64, k: f64) -> Payoff {
    Payoff::BasketCall { u: vec![sign, -sign], k }
}

fn basket_put(k: f64) -> Payoff {
    Payoff::BasketPut { u: vec![1.0, 1.0], k }
}

/// Legs `(S1−S2−k)_+ (S1/k)^{α1−1}` and `(S2−S1−k)_+ (S2/k)^{α2−1}`.
fn y_legs(k: f64, alphas: [f64; 2]) -> [Payoff; 2] {
    [weighted(1, k, alphas[0] - 1.0, spread(1.0, k)), weighted(2, k, alphas[1] - 1.0, spread(-1.0, k))]
}

/// Hedge for a two-asset joint claim. Both assets must be quasi-self-dual
/// for their carrying costs with the solved orders; the X claim needs both
/// orders equal to 1.
pub fn two_asset_joint_hedges(cfg: &PathConfig, claim: JointClaim) -> Result<JointHedgePlan> {
    if cfg.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cfg.dim() });
    }
    if cfg.has_jumps() {
        return Err(Error::SymmetryPrereqFailed("joint hedges need a driver without jumps".into()));
    }
    let mut alphas = [0.0; 2];
    for i in 1..=2 {
        let sol = solve_alpha(&cfg.driver, i, cfg.lambda[i - 1]).map_err(|e| Error::SymmetryPrereqFailed(format!("α for asset {i}: {e}")))?;
        let rep = check_qsd_triplet(&cfg.driver, i, cfg.lambda[i - 1], sol.alpha, 1e-10)?;
        if rep.verdict != Verdict::Pass {
            return Err(Error::SymmetryPrereqFailed(format!("driver is not quasi-self-dual for asset {i}: {}", rep.verdict_line())));
        }
        alphas[i - 1] = sol.alpha;
    }
    let hedge = match claim {
        JointClaim::X { k } => {
            if !(k > 0.0) || cfg.s0.iter().any(|&s| s <= k) {
                return Err(domain("X claim needs 0 < k below both initial prices"));
            }
            if alphas.iter().any(|a| (a - 1.0).abs() > 1e-10) {
                return Err(Error::SymmetryPrereqFailed(format!("X claim needs α = 1 for both assets, got {alphas:?}")));
            }
            basket_put(k)
        }
        JointClaim::Y { k } => {
            if cfg.s0.iter().any(|&s| s >= k) {
                return Err(domain("Y claim needs k above both initial prices"));
            }
            let [l, s] = y_legs(k, alphas);
            Payoff::Sum(vec![
                l,
                Payoff::Scaled {
                    c: -1.0,
                    inner: Box::new(s),
                },
            ])
        }
    };
    Ok(JointHedgePlan { claim, alphas, hedge })
}

/// Nested Monte-Carlo check of a joint hedge with exchanges at each
/// asset's barrier hit.
pub fn evaluate_joint_hedge(plan: &JointHedgePlan, cfg: &PathConfig, settings: &HedgeSettings, rng: &mut RngStream) -> Result<HedgeReport> {
    if cfg.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: cfg.dim() });
    }
    let (k, identities) = match plan.claim {
        JointClaim::X { k } => (
            k,
            vec![
                Identity {
                    label: "x_asset1".into(),
                    claim: spread(1.0, k),
                    hedge: basket_put(k),
                    side: 1.0,
                },
                Identity {
                    label: "x_asset2".into(),
                    claim: spread(-1.0, k),
                    hedge: basket_put(k),
                    side: 1.0,
                },
            ],
        ),
        JointClaim::Y { k } => {
            let [l, s] = y_legs(k, plan.alphas);
            (
                k,
                vec![
                    Identity {
                        label: "y_asset1".into(),
                        claim: basket_put(k),
                        hedge: l,
                        side: 1.0,
                    },
                    Identity {
                        label: "y_asset2".into(),
                        claim: basket_put(k),
                        hedge: s,
                        side: 1.0,
                    },
                ],
            )
        }
    };
    let barriers = [Barrier::new(1, k, &cfg.s0)?, Barrier::new(2, k, &cfg.s0)?];
    let claims: Vec<Payoff> = identities.iter().map(|i| i.claim.clone()).collect();
    let legs = match plan.claim {
        JointClaim::Y { k } => Some(y_legs(k, plan.alphas)),
        JointClaim::X { .. } => None,
    };
    let outer = |id: usize, r: &mut RngStream| -> Result<OuterPath> {
        let path = simulate_one(cfg, r)?;
        let h1 = first_hit(cfg, &path, &barriers[0], r);
        let h2 = first_hit(cfg, &path, &barriers[1], r);
        let st = path.terminal().to_vec();
        let hedge = plan.hedge.eval(&st);
        let state = |j: usize, rec: HitRecord| {
            let mut s = path.at(rec.step).to_vec();
            s[j] = rec.value;
            s
        };
        let (claim, hits, knocked, mismatch) = match plan.claim {
            JointClaim::X { .. } => {
                let first = match (h1, h2) {
                    (Some(a), Some(b)) if b.step < a.step => Some((1, b)),
                    (Some(a), _) => Some((0, a)),
                    (None, Some(b)) => Some((1, b)),
                    (None, None) => None,
                };
                match first {
                    Some((j, rec)) => (claims[j].eval(&st), vec![(j, rec, state(j, rec))], true, None),
                    None => (0.0, vec![], false, Some(hedge)),
                }
            }
            JointClaim::Y { .. } => {
                let legs = legs.as_ref().expect("Y legs");
                let put = basket_put(k).eval(&st);
                let mut hits = Vec::new();
                if let Some(a) = h1 {
                    hits.push((0, a, state(0, a)));
                }
                if let Some(b) = h2 {
                    hits.push((1, b, state(1, b)));
                }
                let (claim, mismatch) = match (h1, h2) {
                    (None, None) => (0.0, Some(hedge)),
                    // the unexchanged leg must expire worthless
                    (Some(_), None) => (put, Some(legs[1].eval(&st))),
                    (None, Some(_)) => (-put, Some(legs[0].eval(&st))),
                    (Some(_), Some(_)) => (0.0, None),
                };
                (claim, hits, h1.is_some() || h2.is_some(), mismatch)
            }
        };
        let overshoot = hits.iter().any(|h| h.1.overshoot);
        Ok(OuterPath {
            id,
            hits,
            knocked,
            claim,
            hedge,
            overshoot,
            terminal_mismatch: mismatch,
        })
    };
    let eval = Evaluation {
        name: format!("joint hedge {:?}", plan.claim),
        cfg,
        settings: *settings,
        identities,
        one_sided: false,
        price_floor: false,
    };
    let mut rep = eval.run(&outer, rng)?;
    // the joint claim is paid on knocked paths; compare its value with the hedge cost
    let d = rep.prices;
    rep.prices.hedge_minus_claim = Estimate {
        value: d.hedge.value - d.knock_in.value,
        std_error: rep.prices.hedge_minus_claim.std_error,
    };
    Ok(rep)
}

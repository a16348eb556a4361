//! Self-duality and quasi-self-duality checks at the distribution level.
//!
//! Every check returns a [`SymmetryReport`]: exact residuals are compared
//! against an absolute tolerance, Monte-Carlo residuals against a band of
//! standard errors. Monte-Carlo residuals always use common random numbers
//! on both sides of an identity.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{draw, mc_expect, Atoms, CustomDensity, DensityFn, Law, SampleMatrix, ScalarModel};
use crate::error::{check_index, domain, Error, Result};
use crate::geometry::{reflect_pi, LiftVector};
use crate::linalg::k_matrix;
use crate::quad::{integrate_positive, QuadConfig};
use crate::report::{Bands, ReportBuilder, SymmetryReport};
use crate::rng::RngStream;
use crate::stats::Running;

/// Tolerance for identities evaluated by quadrature on both sides.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// The numeraire-change involutions `κ_i` (prices) and `K_i` (log-prices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KappaMaps {
    n: usize,
    i: usize,
}

impl KappaMaps {
    /// `i` is 1-based.
    pub fn new(n: usize, i: usize) -> Result<Self> {
        check_index(i, n)?;
        Ok(Self { n, i })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn numeraire(&self) -> usize {
        self.i
    }

    /// `κ_i(x) = (x_1/x_i, …, 1/x_i, …, x_n/x_i)`.
    pub fn kappa(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(domain("kappa needs a strictly positive point"));
        }
        Ok(self.kappa_unchecked(x))
    }

    pub(crate) fn kappa_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let xi = x[self.i - 1];
        x.iter()
            .enumerate()
            .map(|(l, &v)| if l == self.i - 1 { 1.0 / xi } else { v / xi })
            .collect()
    }

    /// `K_i x = (x_1 − x_i, …, −x_i, …, x_n − x_i)`.
    pub fn big_k(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let xi = x[self.i - 1];
        Ok(x.iter()
            .enumerate()
            .map(|(l, &v)| if l == self.i - 1 { -xi } else { v - xi })
            .collect())
    }

    /// Matrix form of `K_i`.
    pub fn k_matrix(&self) -> DMatrix<f64> {
        k_matrix(self.n, self.i)
    }

    /// `κ̂_i(S, H) = (H/S_i)(S_1, …, H, …, S_n)`.
    pub fn kappa_hat(&self, s: &[f64], h: f64) -> Vec<f64> {
        let si = s[self.i - 1];
        s.iter()
            .enumerate()
            .map(|(l, &v)| if l == self.i - 1 { h * h / si } else { h * v / si })
            .collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `κ_i(x)`.
pub fn kappa(maps: &KappaMaps, x: &[f64]) -> Result<Vec<f64>> {
    maps.kappa(x)
}

/// `K_i x`.
pub fn big_kappa(maps: &KappaMaps, x: &[f64]) -> Result<Vec<f64>> {
    maps.big_k(x)
}

/// `m` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..m).map(|j| (a + (b - a) * j as f64 / (m - 1) as f64).exp()).collect()
}

/// Tensor grid with 7 log-spaced points per coordinate in `[0.2, 5]`.
pub fn default_grid(n: usize) -> Vec<Vec<f64>> {
    tensor_grid(&log_grid(0.2, 5.0, 7), n)
}

pub fn tensor_grid(axis: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// Payoff families of the lift zonoid (`basket`) and the lift max-zonoid
/// (`max`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffFamily {
    Basket,
    Max,
}

impl PayoffFamily {
    fn eval(&self, lv: &LiftVector, x: &[f64]) -> f64 {
        match self {
            Self::Basket => lv.pay(x).max(0.0),
            Self::Max => lv.pay_max(x),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Basket => "basket",
            Self::Max => "max",
        }
    }
}

/// `count` random lift vectors derived from `seed`: components uniform in
/// `[−1, 1]` for baskets and `[0, 1]` for max payoffs.
pub fn random_test_vectors(n: usize, family: PayoffFamily, count: usize, seed: u64) -> Vec<LiftVector> {
    let tag = match family {
        PayoffFamily::Basket => 1,
        PayoffFamily::Max => 2,
    };
    let mut rng = RngStream::new(seed, 0x7E57_0000 + tag);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..=n).map(|_| rng.open01()).collect();
            if family == PayoffFamily::Basket {
                v.iter_mut().for_each(|x| *x = 2.0 * *x - 1.0);
            }
            LiftVector::from_full(&v).expect("finite test vector")
        })
        .collect()
}

/// Settings shared by the Monte-Carlo checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSettings {
    pub n_samples: usize,
    pub n_vectors: usize,
    /// Seed for test vectors and permutations.
    pub design_seed: u64,
    pub bands: Bands,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            n_vectors: 20,
            design_seed: 20_240_917,
            bands: Bands::default(),
        }
    }
}

/// Density criterion `p(x) = x_i^{−(n+2)} p(κ_i(x))`.
pub fn check_density_self_dual<L: Law + ?Sized>(model: &L, i: usize, grid: &[Vec<f64>]) -> Result<SymmetryReport> {
    let n = model.dim();
    let maps = KappaMaps::new(n, i)?;
    let mut b = ReportBuilder::new(format!("density_self_dual[i={i}]"), Bands::default());
    for x in grid {
        let p = model.density(x)?;
        let q = model.density(&maps.kappa(x)?)?;
        let r = p - x[i - 1].powi(-(n as i32 + 2)) * q;
        b.exact_tol("x", x.clone(), r, 1e-10 * (1.0 + p));
    }
    Ok(b.finish())
}

/// Integrated-tail criterion `z F̄_I(1/z) = F̄_I(z)` together with
/// `F̄_I(∞) = 1`.
pub fn check_integrated_tail_symmetry(model: &ScalarModel, z_grid: &[f64]) -> Result<SymmetryReport> {
    let tol = match model {
        ScalarModel::LogNormal { .. } | ScalarModel::DiscreteAtoms(_) => Bands::default().exact_tol,
        _ => QUADRATURE_TOL,
    };
    let mut b = ReportBuilder::new("integrated_tail_symmetry", Bands::default());
    for &z in z_grid {
        if !(z > 0.0) {
            return Err(domain(format!("z grid must be positive, got {z}")));
        }
        let r = z * model.integrated_tail(1.0 / z)? - model.integrated_tail(z)?;
        b.exact_tol("z", vec![z], r, tol);
    }
    let total = model.integrated_tail(f64::INFINITY)?;
    b.exact_tol("tail_at_infinity", vec![f64::INFINITY], total - 1.0, tol);
    Ok(b.finish())
}

/// Monte-Carlo version of the integrated-tail criterion on raw draws,
/// using `z min(η, 1/z) = min(zη, 1)` per sample.
pub fn check_integrated_tail_symmetry_mc(samples: &[f64], z_grid: &[f64], bands: Bands) -> Result<SymmetryReport> {
    let mut b = ReportBuilder::new("integrated_tail_symmetry_mc", bands);
    for &z in z_grid {
        let mut acc = Running::default();
        let mut scale = Running::default();
        for &x in samples {
            let lhs = (z * x).min(1.0);
            let rhs = x.min(z);
            acc.push(lhs - rhs);
            scale.push(rhs);
        }
        let e = acc.estimate();
        b.mc("z", vec![z], e.value, e.std_error, scale.mean());
    }
    let mut m = Running::default();
    samples.iter().for_each(|&x| m.push(x));
    let e = m.estimate();
    b.mc("mean_one", vec![], e.value - 1.0, e.std_error, 1.0);
    Ok(b.finish())
}

type RationalAtom = (Vec<Ratio<i128>>, Ratio<i128>);
type TestFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn bounded_payoffs(n: usize) -> [(&'static str, TestFn); 3] {
    [
        ("exp_sum", Box::new(|x: &[f64]| (-x.iter().sum::<f64>()).exp())),
        ("inv_max", Box::new(|x: &[f64]| 1.0 / (1.0 + x.iter().fold(0.0f64, |m, &v| m.max(v))))),
        ("simplex", Box::new(move |x: &[f64]| if x.iter().sum::<f64>() <= n as f64 { 1.0 } else { 0.0 })),
    ]
}

/// Payoff symmetry on pre-drawn samples.
pub fn payoff_symmetry_on(
    samples: &SampleMatrix,
    i: usize,
    family: PayoffFamily,
    test_vectors: &[LiftVector],
    bands: Bands,
) -> Result<SymmetryReport> {
    let n = samples.dim();
    let maps = KappaMaps::new(n, i)?;
    let mut b = ReportBuilder::new(format!("payoff_symmetry[{}, i={i}]", family.name()), bands);
    for lv in test_vectors {
        if lv.dim() != n {
            return Err(Error::Dimension { expected: n, got: lv.dim() });
        }
        if family == PayoffFamily::Max && (lv.u0 < 0.0 || lv.u.iter().any(|&v| v < 0.0)) {
            return Err(domain("max payoff test vectors must be nonnegative"));
        }
    }
    let rows: Vec<(Vec<f64>, f64, f64, f64)> = test_vectors
        .par_iter()
        .map(|lv| {
            let pv = reflect_pi(lv, i).expect("index checked");
            let mut acc = Running::default();
            let mut scale = Running::default();
            for x in samples.rows() {
                let a = family.eval(lv, x);
                acc.push(a - family.eval(&pv, x));
                scale.push(a.abs());
            }
            let e = acc.estimate();
            (lv.full(), e.value, e.std_error, scale.mean())
        })
        .collect();
    for (p, r, se, sc) in rows {
        b.mc(family.name(), p, r, se, sc);
    }
    // E f(η) = E[f(κ_i(η)) η_i] for bounded f
    let pays = bounded_payoffs(n);
    let rows: Vec<(&str, f64, f64, f64)> = pays
        .par_iter()
        .map(|(name, f)| {
            let mut acc = Running::default();
            let mut scale = Running::default();
            for x in samples.rows() {
                let a = f(x);
                acc.push(a - f(&maps.kappa_unchecked(x)) * x[i - 1]);
                scale.push(a.abs());
            }
            let e = acc.estimate();
            (*name, e.value, e.std_error, scale.mean())
        })
        .collect();
    for (name, r, se, sc) in rows {
        b.mc(format!("change_of_numeraire:{name}"), vec![], r, se, sc);
    }
    Ok(b.finish())
}

/// Conditions (i)/(ii) on random lift vectors and (iii) on three bounded
/// payoffs, all on one set of draws.
pub fn check_payoff_symmetry<L: Law + ?Sized>(
    model: &L,
    i: usize,
    family: PayoffFamily,
    test_vectors: &[LiftVector],
    rng: &mut RngStream,
    n_samples: usize,
    bands: Bands,
) -> Result<SymmetryReport> {
    check_index(i, model.dim())?;
    let samples = draw(model, n_samples, rng)?;
    payoff_symmetry_on(&samples, i, family, test_vectors, bands)
}

fn permutation(len: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    for k in (1..len).rev() {
        let j = (rng.open01() * (k + 1) as f64) as usize;
        p.swap(k, j.min(k));
    }
    p
}

/// Joint self-duality: payoff symmetry for every numeraire, permutation
/// invariance of max payoffs and exchangeability of coordinate pairs.
pub fn check_joint_self_duality<L: Law + ?Sized>(model: &L, rng: &mut RngStream, settings: &McSettings) -> Result<SymmetryReport> {
    let n = model.dim();
    let samples = draw(model, settings.n_samples, rng)?;
    let bands = settings.bands;
    let mut b = ReportBuilder::new("joint_self_duality", bands);
    let basket = random_test_vectors(n, PayoffFamily::Basket, settings.n_vectors, settings.design_seed);
    let maxv = random_test_vectors(n, PayoffFamily::Max, settings.n_vectors, settings.design_seed);
    for i in 1..=n {
        b.absorb(&format!("i={i}:"), payoff_symmetry_on(&samples, i, PayoffFamily::Basket, &basket, bands)?);
        b.absorb(&format!("i={i}:"), payoff_symmetry_on(&samples, i, PayoffFamily::Max, &maxv, bands)?);
    }
    // permutation invariance of E max(u0, u_l η_l) over all n+1 coordinates
    let mut prng = RngStream::new(settings.design_seed, 0x9E4A);
    let perms: Vec<Vec<usize>> = (0..5).map(|_| permutation(n + 1, &mut prng)).collect();
    for (pk, perm) in perms.iter().enumerate() {
        for lv in maxv.iter().take(4) {
            let full = lv.full();
            let permuted: Vec<f64> = perm.iter().map(|&j| full[j]).collect();
            let pv = LiftVector::from_full(&permuted)?;
            let mut acc = Running::default();
            let mut scale = Running::default();
            for x in samples.rows() {
                let a = lv.pay_max(x);
                acc.push(a - pv.pay_max(x));
                scale.push(a);
            }
            let e = acc.estimate();
            b.mc(format!("permutation[{pk}]"), full, e.value, e.std_error, scale.mean());
        }
    }
    // exchangeability of each coordinate pair
    for j in 1..=n {
        for l in (j + 1)..=n {
            for &t in &[0.5, 1.0, 2.0] {
                let mut acc = Running::default();
                for x in samples.rows() {
                    let a = (x[j - 1] <= t) as u8 as f64;
                    let c = (x[l - 1] <= t) as u8 as f64;
                    acc.push(a - c);
                }
                let e = acc.estimate();
                b.mc(format!("exchange_marginal[{j},{l}]"), vec![t], e.value, e.std_error, 1.0);
            }
            for &(s, t) in &[(0.7, 1.4), (1.5, 0.6)] {
                let mut acc = Running::default();
                for x in samples.rows() {
                    let a = (x[j - 1] <= s && x[l - 1] <= t) as u8 as f64;
                    let c = (x[l - 1] <= s && x[j - 1] <= t) as u8 as f64;
                    acc.push(a - c);
                }
                let e = acc.estimate();
                b.mc(format!("exchange_pair[{j},{l}]"), vec![s, t], e.value, e.std_error, 1.0);
            }
        }
    }
    Ok(b.finish())
}

/// Small-denominator rational equal to `x` as an `f64`, if one exists.
fn rationalize(x: f64) -> Option<Ratio<i128>> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > 1_000_000 {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64) == x {
            return Some(Ratio::new(h1, k1));
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Discrete criterion: each atom `x` has a partner `κ_i(x)` with
/// `Q(η = κ_i(x)) = x_i Q(η = x)`. Uses exact rational arithmetic when
/// every value and probability is a small-denominator rational.
pub fn check_discrete_self_dual(atoms: &[(Vec<f64>, f64)], i: usize) -> Result<SymmetryReport> {
    let n = atoms.first().map(|a| a.0.len()).ok_or_else(|| domain("no atoms"))?;
    let maps = KappaMaps::new(n, i)?;
    let mut b = ReportBuilder::new(format!("discrete_self_dual[i={i}]"), Bands::default());
    for (x, q) in atoms {
        if x.len() != n || x.iter().any(|&v| !(v > 0.0)) || !(*q > 0.0) {
            return Err(domain("atoms must be positive with positive probabilities"));
        }
    }
    let exact: Option<Vec<RationalAtom>> = atoms
        .iter()
        .map(|(x, q)| {
            let xr: Option<Vec<Ratio<i128>>> = x.iter().map(|&v| rationalize(v)).collect();
            Some((xr?, rationalize(*q)?))
        })
        .collect();
    if let Some(ex) = exact {
        b.note("exact rational arithmetic");
        let total: Ratio<i128> = ex.iter().map(|a| a.1).sum();
        let one = Ratio::from_integer(1);
        b.exact_tol("total_mass", vec![], if total == one { 0.0 } else { to_f64(total - one) }, 0.0);
        for ((xr, qr), (x, _)) in ex.iter().zip(atoms) {
            let xi = xr[i - 1];
            let kx: Vec<Ratio<i128>> = xr
                .iter()
                .enumerate()
                .map(|(l, &v)| if l == i - 1 { xi.recip() } else { v / xi })
                .collect();
            let partner: Ratio<i128> = ex.iter().filter(|a| a.0 == kx).map(|a| a.1).sum();
            let diff = partner - xi * qr;
            b.exact_tol("atom", x.clone(), to_f64(diff), 0.0);
        }
    } else {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        b.exact_tol("total_mass", vec![], total - 1.0, 1e-12);
        for (x, q) in atoms {
            let kx = maps.kappa(x)?;
            let partner: f64 = atoms
                .iter()
                .filter(|a| a.0.iter().zip(&kx).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs())))
                .map(|a| a.1)
                .sum();
            if partner == 0.0 {
                b.note(format!("no atom at κ(x) = {kx:?}"));
            }
            b.exact_tol("atom", x.clone(), partner - x[i - 1] * q, 1e-12);
        }
    }
    Ok(b.finish())
}

fn to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Scalar convenience wrapper around [`check_discrete_self_dual`].
pub fn check_discrete_self_dual_scalar(atoms: &Atoms) -> Result<SymmetryReport> {
    let pts: Vec<(Vec<f64>, f64)> = atoms.points().iter().map(|&(v, p)| (vec![v], p)).collect();
    check_discrete_self_dual(&pts, 1)
}

/// Output of [`extend_self_dual_density`].
#[derive(Debug, Clone)]
pub struct Extension {
    pub model: ScalarModel,
    pub normalizer: f64,
    pub mean: f64,
}

/// Extends a density given on `[1, ∞)` to `(0, 1)` by
/// `p(x) = x^{−3} p(1/x)` and normalizes.
pub fn extend_self_dual_density(tail: DensityFn) -> Result<Extension> {
    let probe = |g: &dyn Fn(f64) -> f64| {
        let v = [2f64.powi(10), 2f64.powi(20), 2f64.powi(30)].map(g);
        v[2] == 0.0 || (v[1] < v[0] && v[2] < v[1])
    };
    let t = tail.clone();
    if !probe(&|x| x * t(x)) {
        return Err(Error::NotIntegrable("p(x) is not integrable on [1, ∞)".into()));
    }
    if !probe(&|x| x * x * t(x)) {
        return Err(Error::NotIntegrable(
            "x·p(x) is not integrable on [1, ∞), so the extension to (0, 1) has infinite mass".into(),
        ));
    }
    let cfg = QuadConfig::tight();
    let upper = integrate_positive(|x| t(x), 1.0, f64::INFINITY, &[], &cfg)
        .map_err(|e| Error::NotIntegrable(format!("p(x) on [1, ∞): {e}")))?
        .value;
    let lower = integrate_positive(|x| x * t(x), 1.0, f64::INFINITY, &[], &cfg)
        .map_err(|e| Error::NotIntegrable(format!("x·p(x) on [1, ∞): {e}")))?
        .value;
    let mass = upper + lower;
    if !(mass > 0.0) {
        return Err(Error::NotIntegrable("tail density has zero mass".into()));
    }
    let c = 1.0 / mass;
    let density: DensityFn = Arc::new(move |x: f64| {
        if x >= 1.0 {
            c * tail(x)
        } else {
            c * x.powi(-3) * tail(1.0 / x)
        }
    });
    let model = ScalarModel::Custom(CustomDensity::new("self-dual extension", density, 0.0, f64::INFINITY, vec![1.0])?);
    let mean = model.mean()?;
    Ok(Extension {
        model,
        normalizer: c,
        mean,
    })
}

/// `E η^n − E η^{1−n}`.
pub fn moment_identity_residual(model: &ScalarModel, n: f64) -> Result<f64> {
    Ok(model.raw_moment(n)? - model.raw_moment(1.0 - n)?)
}

/// Moment identities for `n = 2, 3`, the sign of the skewness and the
/// identity `E(η − Eη)³ = E[(η − 1)²(η + η^{−1} − 2)]`.
pub fn check_moment_and_skewness(model: &ScalarModel) -> Result<SymmetryReport> {
    model.check_moment(3.0)?;
    model.check_moment(-2.0)?;
    let m = |r: f64| model.raw_moment(r);
    let (m1, m2, m3, mm1, mm2) = (m(1.0)?, m(2.0)?, m(3.0)?, m(-1.0)?, m(-2.0)?);
    let tol = |a: f64| 1e-9 * (1.0 + a.abs());
    let mut b = ReportBuilder::new("moments_and_skewness", Bands::default());
    b.exact_tol("mean_one", vec![1.0], m1 - 1.0, tol(m1));
    b.exact_tol("moment_identity", vec![2.0], m2 - mm1, tol(m2));
    b.exact_tol("moment_identity", vec![3.0], m3 - mm2, tol(m3));
    let central3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    // (η−1)²(η+η^{-1}−2) = η³ − 4η² + 6η − 4 + η^{-1}
    let rhs = m3 - 4.0 * m2 + 6.0 * m1 - 4.0 + mm1;
    b.exact_tol("skewness_identity", vec![], central3 - rhs, tol(m3));
    let var = m2 - m1 * m1;
    let skew = if var > 1e-300 { central3 / var.powf(1.5) } else { 0.0 };
    b.exact_tol("skewness_nonnegative", vec![skew], skew.min(0.0), tol(m3));
    b.note(format!("skewness = {skew}"));
    Ok(b.finish())
}

/// The law of `(e^λ ∘ η)^α`.
pub struct QsdTransform<'a, L: Law + ?Sized> {
    base: &'a L,
    lambda: Vec<f64>,
    alpha: f64,
}

impl<'a, L: Law + ?Sized> QsdTransform<'a, L> {
    pub fn new(base: &'a L, lambda: &[f64], alpha: f64) -> Result<Self> {
        if lambda.len() != base.dim() {
            return Err(Error::Dimension {
                expected: base.dim(),
                got: lambda.len(),
            });
        }
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(domain("alpha must be a nonzero real"));
        }
        Ok(Self {
            base,
            lambda: lambda.to_vec(),
            alpha,
        })
    }
}

impl<L: Law + ?Sized> Law for QsdTransform<'_, L> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
        self.base.sample_into(rng, out)?;
        for (o, l) in out.iter_mut().zip(&self.lambda) {
            *o = (l + o.ln()).mul_add(self.alpha, 0.0).exp();
        }
        Ok(())
    }

    fn density(&self, y: &[f64]) -> Result<f64> {
        let x: Vec<f64> = y
            .iter()
            .zip(&self.lambda)
            .map(|(v, l)| (v.ln() / self.alpha - l).exp())
            .collect();
        let jac: f64 = x.iter().zip(y).map(|(a, b)| (a / (self.alpha * b)).abs()).product();
        Ok(self.base.density(&x)? * jac)
    }

    fn mean_vec(&self) -> Result<Vec<f64>> {
        Err(domain("mean of the transformed law is not available in closed form"))
    }
}

/// Quasi-self-duality of order `α` with carrying costs `λ`: runs the
/// payoff (and, where a density exists, density) checks on
/// `(e^λ ∘ η)^α`, and tests `E f(Y) = E[f(κ_i(Y)) Y_i^α]` for
/// `Y = e^λ ∘ η` on three bounded payoffs.
pub fn check_quasi_self_dual<L: Law + ?Sized>(
    model: &L,
    i: usize,
    lambda: &[f64],
    alpha: f64,
    rng: &mut RngStream,
    settings: &McSettings,
) -> Result<SymmetryReport> {
    let n = model.dim();
    let maps = KappaMaps::new(n, i)?;
    let zeta = QsdTransform::new(model, lambda, alpha)?;
    let bands = settings.bands;
    let mut b = ReportBuilder::new(format!("quasi_self_dual[i={i}, alpha={alpha}]"), bands);
    let basket = random_test_vectors(n, PayoffFamily::Basket, settings.n_vectors, settings.design_seed);
    let samples = draw(&zeta, settings.n_samples, rng)?;
    b.absorb("transformed:", payoff_symmetry_on(&samples, i, PayoffFamily::Basket, &basket, bands)?);
    match check_density_self_dual(&zeta, i, &default_grid(n)) {
        Ok(r) => {
            b.absorb("transformed:", r);
        }
        Err(Error::NoDensity) => {
            b.note("transformed law has no density; density check skipped");
        }
        Err(e) => return Err(e),
    }
    // samples of Y = e^λ∘η recovered from the transformed draws
    let ys: Vec<f64> = samples.as_slice().iter().map(|z| z.powf(1.0 / alpha)).collect();
    let ys = SampleMatrix::new(n, ys);
    let pays: [(&str, TestFn); 3] = [
        ("constant", Box::new(|_x: &[f64]| 1.0)),
        ("exp_sum", Box::new(|x: &[f64]| (-x.iter().sum::<f64>()).exp())),
        ("inv_max", Box::new(|x: &[f64]| 1.0 / (1.0 + x.iter().fold(0.0f64, |m, &v| m.max(v))))),
    ];
    for (name, f) in pays.iter() {
        let mut acc = Running::default();
        let mut scale = Running::default();
        for y in ys.rows() {
            let a = f(y);
            acc.push(a - f(&maps.kappa_unchecked(y)) * y[i - 1].powf(alpha));
            scale.push(a.abs());
        }
        let e = acc.estimate();
        b.mc(format!("log_symmetry:{name}"), vec![], e.value, e.std_error, scale.mean());
    }
    Ok(b.finish())
}

/// `q(x) = p_{aη}(1/x) / p_{aη}(x)`, the weight turning `E f(aη)` into an
/// expectation of `f(1/(aη))`; equals `x³` for self-dual `η` with `a = 1`
/// and `x^{2+α}` in the quasi-self-dual case.
pub fn asymmetry_correction(model: &ScalarModel, a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && x > 0.0) {
        return Err(domain("asymmetry correction needs a > 0 and x > 0"));
    }
    let p = |y: f64| -> Result<f64> { Ok(model.pdf(y / a)? / a) };
    let num = p(1.0 / x)?;
    let den = p(x)?;
    if den == 0.0 {
        return Err(Error::ZeroDensity(x));
    }
    if num == 0.0 {
        return Err(Error::ZeroDensity(1.0 / x));
    }
    Ok(num / den)
}

/// Sample mean of coordinate `i` with its standard error.
pub fn marginal_mean<L: Law + ?Sized>(model: &L, i: usize, rng: &mut RngStream, n: usize) -> Result<crate::stats::Estimate> {
    check_index(i, model.dim())?;
    mc_expect(model, n, rng, |x| x[i - 1])
}

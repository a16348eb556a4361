//! Support functions of lift zonoids and lift max-zonoids, the
//! Hüsler–Reiss norm and the boundary of the lift zonoid.
//!
//! A lift vector `(u0, u)` pairs a bond coordinate `u0` with asset weights
//! `u`; coordinates are numbered `0, 1, …, n`.

use std::io::{self, Write};

use serde::Serialize;

use crate::dist::{mc_expect, Law, ScalarModel};
use crate::error::{check_index, domain, Error, Result};
use crate::report::fmt_sig17;
use crate::rng::RngStream;
use crate::special::{black_call, black_put, norm_cdf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftVector {
    pub u0: f64,
    pub u: Vec<f64>,
}

impl LiftVector {
    pub fn new(u0: f64, u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(domain("lift vector needs at least one asset weight"));
        }
        if !u0.is_finite() || u.iter().any(|v| !v.is_finite()) {
            return Err(domain("lift vector entries must be finite"));
        }
        Ok(Self { u0, u })
    }

    /// From the full coordinate list `(u0, u1, …, un)`.
    pub fn from_full(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(domain("lift vector needs at least two coordinates"));
        }
        Self::new(x[0], x[1..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn full(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.u.len() + 1);
        v.push(self.u0);
        v.extend_from_slice(&self.u);
        v
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u0: c * self.u0,
            u: self.u.iter().map(|v| c * v).collect(),
        }
    }

    /// `u0 + Σ u_l x_l`.
    pub fn pay(&self, x: &[f64]) -> f64 {
        self.u0 + self.u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `max(u0, u_1 x_1, …, u_n x_n)`.
    pub fn pay_max(&self, x: &[f64]) -> f64 {
        self.u.iter().zip(x).fold(self.u0, |m, (a, b)| m.max(a * b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
}

impl SupportEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            method: Method::ClosedForm,
        }
    }
}

/// `π_i`: swaps coordinate 0 with coordinate `i` (1-based).
pub fn reflect_pi(lv: &LiftVector, i: usize) -> Result<LiftVector> {
    check_index(i, lv.dim())?;
    let mut out = lv.clone();
    std::mem::swap(&mut out.u0, &mut out.u[i - 1]);
    Ok(out)
}

fn check_dim<L: Law + ?Sized>(model: &L, lv: &LiftVector) -> Result<()> {
    if model.dim() != lv.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: lv.dim(),
        });
    }
    Ok(())
}

/// Support function of the lift zonoid, `E(u0 + Σ u_l η_l)_+`.
pub fn support_lift_zonoid<L: Law + ?Sized>(model: &L, lv: &LiftVector, rng: &mut RngStream, n_samples: usize) -> Result<SupportEstimate> {
    check_dim(model, lv)?;
    if lv.u0 >= 0.0 && lv.u.iter().all(|&v| v >= 0.0) {
        let mean = model.mean_vec()?;
        return Ok(SupportEstimate::exact(lv.pay(&mean)));
    }
    if lv.u0 <= 0.0 && lv.u.iter().all(|&v| v <= 0.0) {
        return Ok(SupportEstimate::exact(0.0));
    }
    if let Some(m) = model.as_scalar() {
        return scalar_zonoid(m, lv.u0, lv.u[0]);
    }
    let e = mc_expect(model, n_samples, rng, |x| lv.pay(x).max(0.0))?;
    Ok(SupportEstimate {
        value: e.value,
        std_error: e.std_error,
        method: Method::MonteCarlo,
    })
}

// mixed signs: one of u0, u1 positive, the other negative
fn scalar_zonoid(m: &ScalarModel, u0: f64, u1: f64) -> Result<SupportEstimate> {
    match m {
        ScalarModel::LogNormal { mu, sigma } => {
            let mean = (mu + 0.5 * sigma * sigma).exp();
            let v = if u1 > 0.0 {
                u1 * black_call(mean, -u0 / u1, *sigma)
            } else {
                -u1 * black_put(mean, u0 / -u1, *sigma)
            };
            Ok(SupportEstimate::exact(v))
        }
        ScalarModel::DiscreteAtoms(_) => Ok(SupportEstimate::exact(m.expect(|x| (u0 + u1 * x).max(0.0), &[])?)),
        _ => {
            let k = -u0 / u1;
            Ok(SupportEstimate {
                value: m.expect(|x| (u0 + u1 * x).max(0.0), &[k])?,
                std_error: 0.0,
                method: Method::Quadrature,
            })
        }
    }
}

/// Support function of the lift max-zonoid on the positive orthant,
/// `E max(u0, u_1 η_1, …, u_n η_n)`.
pub fn support_lift_max_zonoid<L: Law + ?Sized>(model: &L, lv: &LiftVector, rng: &mut RngStream, n_samples: usize) -> Result<SupportEstimate> {
    check_dim(model, lv)?;
    if lv.u0 < 0.0 || lv.u.iter().any(|&v| v < 0.0) {
        return Err(domain("max-zonoid support is restricted to nonnegative lift vectors"));
    }
    if lv.u.iter().all(|&v| v == 0.0) {
        return Ok(SupportEstimate::exact(lv.u0));
    }
    if lv.u0 == 0.0 && lv.u.iter().filter(|&&v| v > 0.0).count() == 1 {
        let mean = model.mean_vec()?;
        return Ok(SupportEstimate::exact(lv.pay(&mean)));
    }
    if let Some(m) = model.as_scalar() {
        let (k, f) = (lv.u0, lv.u[0]);
        return match m {
            ScalarModel::LogNormal { mu, sigma } => {
                let mean = (mu + 0.5 * sigma * sigma).exp();
                Ok(SupportEstimate::exact(husler_reiss_norm(k, f * mean, 0.5 * sigma)?))
            }
            ScalarModel::DiscreteAtoms(_) => Ok(SupportEstimate::exact(m.expect(|x| k.max(f * x), &[])?)),
            _ => Ok(SupportEstimate {
                value: m.expect(|x| k.max(f * x), &[k / f])?,
                std_error: 0.0,
                method: Method::Quadrature,
            }),
        };
    }
    let e = mc_expect(model, n_samples, rng, |x| lv.pay_max(x))?;
    Ok(SupportEstimate {
        value: e.value,
        std_error: e.std_error,
        method: Method::MonteCarlo,
    })
}

/// `F Φ(λ + log(F/k)/(2λ)) + k Φ(λ − log(F/k)/(2λ))`, which equals
/// `E max(Fη, k)` for mean-one log-normal `η` with `λ = σ√T/2`.
pub fn husler_reiss_norm(k: f64, f: f64, lambda_hr: f64) -> Result<f64> {
    if !(lambda_hr > 0.0) {
        return Err(domain(format!("Hüsler-Reiss parameter must be positive, got {lambda_hr}")));
    }
    if k < 0.0 || f < 0.0 {
        return Err(domain("Hüsler-Reiss norm is defined on the positive quadrant"));
    }
    if k == 0.0 && f == 0.0 {
        return Err(domain("Hüsler-Reiss norm at the origin"));
    }
    if k == 0.0 {
        return Ok(f);
    }
    if f == 0.0 {
        return Ok(k);
    }
    let l = (f / k).ln() / (2.0 * lambda_hr);
    Ok(f * norm_cdf(lambda_hr + l) + k * norm_cdf(lambda_hr - l))
}

/// `exp(−‖(u1, u2)‖)`, the bivariate max-stable distribution function at
/// `(1/u1, 1/u2)`.
pub fn max_stable_cdf<N: Fn(f64, f64) -> f64>(norm: N, u1: f64, u2: f64) -> f64 {
    if u1 == 0.0 && u2 == 0.0 {
        return 1.0;
    }
    (-norm(u1, u2)).exp()
}

/// A point `(P(η > k), E[η 1{η > k}])` on the upper boundary of the lift
/// zonoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub k: f64,
    pub bc: f64,
    pub gc_over_f: f64,
}

/// Gradient of the support function at `(−k, 1)`.
pub fn boundary_param(model: &ScalarModel, k: f64) -> Result<BoundaryPoint> {
    if !(k > 0.0) {
        return Err(domain(format!("boundary parameter needs k > 0, got {k}")));
    }
    let (bc, gc) = match model {
        ScalarModel::DiscreteAtoms(_) => return Err(Error::AtomicModel),
        ScalarModel::LogNormal { mu, sigma } => {
            let mean = (mu + 0.5 * sigma * sigma).exp();
            let d = (mu - k.ln()) / sigma;
            (norm_cdf(d), mean * norm_cdf(d + sigma))
        }
        _ => {
            let bc = if k.is_infinite() { 0.0 } else { 1.0 - model.cdf(k)? };
            let gc = model.expect(|x| if x > k { x } else { 0.0 }, &[k])?;
            (bc, gc)
        }
    };
    Ok(BoundaryPoint { k, bc, gc_over_f: gc })
}

/// Boundary polyline at `points` log-spaced strikes in `[k_min, k_max]`.
pub fn boundary_polyline(model: &ScalarModel, k_min: f64, k_max: f64, points: usize) -> Result<Vec<BoundaryPoint>> {
    if !(k_min > 0.0 && k_max > k_min) || points < 2 {
        return Err(domain("boundary polyline needs 0 < k_min < k_max and at least two points"));
    }
    let (a, b) = (k_min.ln(), k_max.ln());
    (0..points)
        .map(|j| {
            let t = a + (b - a) * j as f64 / (points - 1) as f64;
            boundary_param(model, t.exp())
        })
        .collect()
}

/// Writes the polyline as CSV with header `k,bc,gc_over_f`.
pub fn write_boundary_csv<W: Write>(points: &[BoundaryPoint], mut w: W) -> io::Result<()> {
    w.write_all(b"k,bc,gc_over_f\n")?;
    for p in points {
        writeln!(w, "{},{},{}", fmt_sig17(p.k), fmt_sig17(p.bc), fmt_sig17(p.gc_over_f))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VectorModel;

    fn ln25() -> ScalarModel {
        ScalarModel::self_dual_lognormal(0.25).unwrap()
    }

    #[test]
    fn case_split() {
        let mut rng = RngStream::new(1, 0);
        let m = ScalarModel::heavy_tail(1.0).unwrap();
        let lv = LiftVector::new(1.0, vec![2.0]).unwrap();
        let s = support_lift_zonoid(&m, &lv, &mut rng, 10).unwrap();
        assert!((s.value - 3.0).abs() < 1e-8);
        let lv = LiftVector::new(-1.0, vec![-1.0]).unwrap();
        assert_eq!(support_lift_zonoid(&m, &lv, &mut rng, 10).unwrap().value, 0.0);
    }

    #[test]
    fn black_scholes_value() {
        let mut rng = RngStream::new(1, 0);
        let lv = LiftVector::new(-1.0, vec![1.0]).unwrap();
        let s = support_lift_zonoid(&ln25(), &lv, &mut rng, 10).unwrap();
        assert!((s.value - (2.0 * norm_cdf(0.125) - 1.0)).abs() < 1e-15);
        assert!((s.value - 0.09948).abs() < 1e-5);
        assert_eq!(s.method, Method::ClosedForm);
        let lv = LiftVector::new(1.0, vec![1.0]).unwrap();
        let m = support_lift_max_zonoid(&ln25(), &lv, &mut rng, 10).unwrap();
        assert!((m.value - 2.0 * norm_cdf(0.125)).abs() < 1e-15);
    }

    #[test]
    fn max_zonoid_links_to_zonoid() {
        let mut rng = RngStream::new(1, 0);
        for m in [ln25(), ScalarModel::heavy_tail(0.0).unwrap(), ScalarModel::lp_self_dual(3.0).unwrap()] {
            for &(k, f) in &[(0.5, 1.0), (1.0, 1.0), (2.0, 0.7), (0.0, 1.3)] {
                let mx = support_lift_max_zonoid(&m, &LiftVector::new(k, vec![f]).unwrap(), &mut rng, 10).unwrap();
                let z = support_lift_zonoid(&m, &LiftVector::new(-k, vec![f]).unwrap(), &mut rng, 10).unwrap();
                assert!((mx.value - k - z.value).abs() < 1e-8, "{k} {f}");
            }
        }
    }

    #[test]
    fn max_zonoid_rejects_negative() {
        let mut rng = RngStream::new(1, 0);
        let lv = LiftVector::new(-1.0, vec![1.0]).unwrap();
        assert!(support_lift_max_zonoid(&ln25(), &lv, &mut rng, 10).is_err());
    }

    #[test]
    fn unit_ball_max_zonoid_is_euclidean_norm() {
        let m = VectorModel::unit_ball_max(2).unwrap();
        let mut rng = RngStream::new(2, 0);
        let lv = LiftVector::new(0.6, vec![0.3, 1.1]).unwrap();
        let s = support_lift_max_zonoid(&m, &lv, &mut rng, 400_000).unwrap();
        let exact = (0.36f64 + 0.09 + 1.21).sqrt();
        assert!((s.value - exact).abs() < 4.0 * s.std_error);
    }

    #[test]
    fn husler_reiss() {
        assert!((husler_reiss_norm(1.0, 1.0, 0.125).unwrap() - 1.09948).abs() < 1e-5);
        assert_eq!(husler_reiss_norm(0.0, 2.0, 0.3).unwrap(), 2.0);
        assert_eq!(husler_reiss_norm(3.0, 0.0, 0.3).unwrap(), 3.0);
        assert!(husler_reiss_norm(0.0, 0.0, 0.3).is_err());
        assert!((husler_reiss_norm(2.0, 0.5, 1e-6).unwrap() - 2.0).abs() < 1e-12);
        for &(k, f) in &[(0.3, 1.7), (2.0, 0.9)] {
            let a = husler_reiss_norm(k, f, 0.2).unwrap();
            let b = husler_reiss_norm(f, k, 0.2).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn max_stable() {
        let hr = |a: f64, b: f64| husler_reiss_norm(a, b, 0.125).unwrap();
        // exp(−2Φ(0.125)) evaluated independently
        assert!((max_stable_cdf(hr, 1.0, 1.0) - 0.333_045_404_095_820_56).abs() < 1e-14);
        assert_eq!(max_stable_cdf(hr, 0.0, 0.0), 1.0);
        let l1 = |a: f64, b: f64| a + b;
        assert!((max_stable_cdf(l1, 0.4, 0.9) - (-0.4f64).exp() * (-0.9f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reflection() {
        let lv = LiftVector::new(1.0, vec![2.0, 3.0]).unwrap();
        assert_eq!(reflect_pi(&lv, 1).unwrap(), LiftVector::new(2.0, vec![1.0, 3.0]).unwrap());
        assert_eq!(reflect_pi(&reflect_pi(&lv, 2).unwrap(), 2).unwrap(), lv);
        let lv = LiftVector::new(0.0, vec![5.0, 7.0]).unwrap();
        assert_eq!(reflect_pi(&lv, 2).unwrap(), LiftVector::new(7.0, vec![5.0, 0.0]).unwrap());
        assert!(reflect_pi(&lv, 3).is_err());
    }

    #[test]
    fn boundary_limits_and_gradient() {
        let m = ScalarModel::self_dual_lognormal(0.5).unwrap();
        let p = boundary_param(&m, 1e-12).unwrap();
        assert!((p.bc - 1.0).abs() < 1e-12 && (p.gc_over_f - 1.0).abs() < 1e-12);
        let p = boundary_param(&m, 1e12).unwrap();
        assert!(p.bc < 1e-12 && p.gc_over_f < 1e-12);
        // central differences of h at (−k, 1)
        let h = |u0: f64, u1: f64| {
            support_lift_zonoid(&m, &LiftVector::new(u0, vec![u1]).unwrap(), &mut RngStream::new(0, 0), 1)
                .unwrap()
                .value
        };
        let eps = 1e-5;
        let d0 = (h(-1.0 + eps, 1.0) - h(-1.0 - eps, 1.0)) / (2.0 * eps);
        let d1 = (h(-1.0, 1.0 + eps) - h(-1.0, 1.0 - eps)) / (2.0 * eps);
        let p = boundary_param(&m, 1.0).unwrap();
        assert!((d0 - p.bc).abs() < 1e-4);
        assert!((d1 - p.gc_over_f).abs() < 1e-4);
        assert!(matches!(boundary_param(&ScalarModel::unit(), 1.0), Err(Error::AtomicModel)));
    }

    #[test]
    fn boundary_quadrature_matches_closed_form_style() {
        let m = ScalarModel::heavy_tail(1.0).unwrap();
        let p = boundary_param(&m, 2.0).unwrap();
        // c = 6/5, tail mass c·2^{-3}/3, tail mean c·2^{-2}/2
        assert!((p.bc - 1.2 / 24.0).abs() < 1e-10);
        assert!((p.gc_over_f - 1.2 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn csv_export() {
        let m = ln25();
        let pts = boundary_polyline(&m, 0.1, 10.0, 5).unwrap();
        let mut buf = Vec::new();
        write_boundary_csv(&pts, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "k,bc,gc_over_f");
        assert_eq!(lines.len(), 6);
        let k: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert!((k - 0.1).abs() < 1e-15);
    }
}

//! Triplet conditions for (quasi-)self-duality and the martingale drift.

use nalgebra::DVector;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::{compensator, Ball, Convention, LevyTriplet};
use crate::error::{check_index, Result};
use crate::linalg::k_matrix;
use crate::report::{Bands, ReportBuilder, SymmetryReport};
use crate::rng::RngStream;

/// Drift component `j` making `E e^{ξ_j} = 1`, in the triplet's own
/// convention. The triplet's current drift is ignored.
pub fn martingale_drift(t: &LevyTriplet, j: usize) -> Result<f64> {
    check_index(j, t.dim())?;
    let b0 = -t.nu().exp_minus_one(j) - 0.5 * t.a()[(j - 1, j - 1)];
    Ok(b0 + compensator(t.nu(), t.convention())?[j - 1])
}

/// The triplet with every drift component replaced by its martingale value.
pub fn martingale_normalized(t: &LevyTriplet) -> Result<LevyTriplet> {
    let comp = compensator(t.nu(), t.convention())?;
    let d = DVector::from_fn(t.dim(), |j, _| -t.nu().exp_minus_one(j + 1) - 0.5 * t.a()[(j, j)] + comp[j]);
    t.with_drift(d)
}

/// Self-duality conditions (1)–(3) with respect to numeraire `i`.
pub fn check_sd_triplet(t: &LevyTriplet, i: usize, tol: f64) -> Result<SymmetryReport> {
    check_qsd_triplet(t, i, 0.0, 1.0, tol)
}

/// Quasi-self-duality conditions for order `alpha` and carrying cost
/// `lambda_i`:
/// (1) `a_ij = a_ji = a_ii/2`,
/// (2) `dν(x) = e^{−αx_i} dν(K_i x)`,
/// (3) `γ_i = ∫_{|||x|||≤1} x_i(1 − e^{(α/2)x_i}) dν − (α/2)a_ii − λ_i`
/// (or its mean-convention form).
pub fn check_qsd_triplet(t: &LevyTriplet, i: usize, lambda_i: f64, alpha: f64, tol: f64) -> Result<SymmetryReport> {
    let n = t.dim();
    check_index(i, n)?;
    let mut b = ReportBuilder::new(format!("qsd_triplet[i={i}, alpha={alpha}, lambda={lambda_i}]"), Bands::default());
    let a = t.a();
    let aii = a[(i - 1, i - 1)];
    for j in 0..n {
        if j == i - 1 {
            continue;
        }
        b.exact_tol("cond1", vec![i as f64, (j + 1) as f64], a[(i - 1, j)] - 0.5 * aii, tol);
        b.exact_tol("cond1", vec![(j + 1) as f64, i as f64], a[(j, i - 1)] - 0.5 * aii, tol);
    }

    let k = k_matrix(n, i);
    let nu = t.nu();
    for (x, q) in nu.atoms() {
        let kx = &k * x;
        let partner: f64 = nu
            .atoms()
            .iter()
            .filter(|(y, _)| y.iter().zip(kx.iter()).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs())))
            .map(|a| a.1)
            .sum();
        if partner == 0.0 {
            b.note(format!("atom {:?} has no partner at K_i x = {:?}", x.as_slice(), kx.as_slice()));
        }
        b.exact_tol("cond2_atom", x.iter().copied().collect(), q - (-alpha * x[i - 1]).exp() * partner, tol);
    }
    if !nu.gaussians().is_empty() {
        let dense = nu.gaussians().iter().all(|g| g.density(g.mean().as_slice()).is_some());
        if dense {
            // density ratio on points spread around each component
            let mut rng = RngStream::new(0xC0D2, i as u64);
            let mut pts = Vec::new();
            for g in nu.gaussians() {
                for _ in 0..100 {
                    let z: DVector<f64> = DVector::from_fn(n, |_, _| { let s: f64 = StandardNormal.sample(&mut rng); 1.5 * s });
                    let chol = g.cov().clone().cholesky().map(|c| c.l()).unwrap_or_else(|| g.cov().clone());
                    pts.push(g.mean() + chol * z);
                }
            }
            let peak = pts
                .iter()
                .map(|x| nu.gaussian_density(x.as_slice()).unwrap_or(0.0))
                .fold(0.0f64, f64::max)
                .max(f64::MIN_POSITIVE);
            for x in pts {
                let kx = &k * &x;
                let f = nu.gaussian_density(x.as_slice()).unwrap_or(f64::NAN);
                let fk = nu.gaussian_density(kx.as_slice()).unwrap_or(f64::NAN);
                b.exact_tol("cond2_density", x.iter().copied().collect(), (f - (-alpha * x[i - 1]).exp() * fk) / peak, tol);
            }
        } else {
            for g in nu.gaussians() {
                match g.tilt_order(i) {
                    Some(order) => {
                        let c = g.mean() + g.cov().column(i - 1) * (0.5 * order);
                        b.exact_tol("cond2_tilt_order", vec![order], order - alpha, tol);
                        b.exact_tol("cond2_center", c.iter().copied().collect(), (&k * &c - &c).amax(), tol);
                    }
                    None => {
                        b.fail("singular Gaussian jump component without the K_i pattern");
                    }
                }
            }
        }
    }

    let (lhs, integral, label) = match t.convention() {
        Convention::Mean => (t.drift()[i - 1], nu.first_moment()[i - 1] - nu.x_exp(i, 0.5 * alpha), "cond3_mean"),
        Convention::Truncated(_) => {
            let ball = Ball::Triple { i };
            let tt = t.with_convention(Convention::Truncated(ball))?;
            let v = nu.ball_integral(ball, &|x| x[i - 1] * -(0.5 * alpha * x[i - 1]).exp_m1())?;
            (tt.drift()[i - 1], v, "cond3")
        }
    };
    let rhs = integral - 0.5 * alpha * aii - lambda_i;
    b.exact_tol(label, vec![lhs, rhs], lhs - rhs, tol);
    Ok(b.finish())
}

/// `|ψ(v − (α/2)i e_i) − ψ(K_iᵀv − (α/2)i e_i) − iλ_i((K_iᵀv)_i − v_i)|`,
/// which vanishes for triplets satisfying the conditions above.
pub fn bridge_residual(t: &LevyTriplet, i: usize, v: &[f64], alpha: f64, lambda_i: f64) -> Result<f64> {
    let n = t.dim();
    check_index(i, n)?;
    let kt = k_matrix(n, i).transpose();
    let kv = &kt * DVector::from_column_slice(v);
    let lhs = t.char_exponent_shifted(v, i, 0.5 * alpha)?;
    let rhs = t.char_exponent_shifted(kv.as_slice(), i, 0.5 * alpha)?;
    let corr = Complex64::new(0.0, lambda_i * (kv[i - 1] - v[i - 1]));
    Ok((lhs - rhs - corr).norm())
}

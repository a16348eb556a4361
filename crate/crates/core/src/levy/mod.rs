//! Lévy triplets with finite jump measures, characteristic exponents,
//! Esscher transforms, the triplet symmetry conditions and the α solver.

mod alpha;
mod conditions;
mod measure;

pub use alpha::{solve_alpha, AlphaMethod, AlphaSolution};
pub use conditions::{bridge_residual, check_qsd_triplet, check_sd_triplet, martingale_drift, martingale_normalized};
pub use measure::{triple_norm, Ball, GaussianJumps, JumpMeasure};

pub use crate::duality::KappaMaps;
pub use crate::special::lambert_w0;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{check_index, Error, Result};
use crate::linalg::{cholesky_psd, is_symmetric};
use crate::rng::RngStream;

/// Which compensator the drift refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `γ` with compensator `x 1_ball`.
    Truncated(Ball),
    /// `μ = E ξ_1`, compensator `x`.
    Mean,
}

/// Generating triplet `(A, ν, drift)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    a: DMatrix<f64>,
    a_chol: DMatrix<f64>,
    nu: JumpMeasure,
    drift: DVector<f64>,
    convention: Convention,
    // drift of the compound-Poisson representation, ξ_t = b0 t + W_t + jumps
    b0: DVector<f64>,
}

fn compensator(nu: &JumpMeasure, c: Convention) -> Result<DVector<f64>> {
    match c {
        Convention::Mean => Ok(nu.first_moment()),
        Convention::Truncated(ball) => {
            if nu.gaussians().is_empty() {
                ball.validate(nu.dim())?;
                let mut m = DVector::zeros(nu.dim());
                for (x, q) in nu.atoms() {
                    if ball.contains(x.as_slice()) {
                        m += x * *q;
                    }
                }
                Ok(m)
            } else {
                nu.ball_first_moment(ball)
            }
        }
    }
}

impl LevyTriplet {
    pub fn new(a: DMatrix<f64>, nu: JumpMeasure, drift: DVector<f64>, convention: Convention) -> Result<Self> {
        let n = a.nrows();
        if !is_symmetric(&a, 1e-12) {
            return Err(Error::InvalidModel("Gaussian covariance must be square and symmetric".into()));
        }
        if nu.dim() != n || drift.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: if nu.dim() != n { nu.dim() } else { drift.len() },
            });
        }
        let eig = a.clone().symmetric_eigenvalues();
        if eig.iter().any(|&e| e < -1e-12) {
            return Err(Error::InvalidModel(format!("Gaussian covariance has a negative eigenvalue {}", eig.min())));
        }
        let a_chol = cholesky_psd(&a, 1e-12).ok_or_else(|| Error::InvalidModel("Gaussian covariance is not PSD".into()))?;
        if !nu.total_mass().is_finite() {
            return Err(Error::InfiniteActivity);
        }
        let b0 = &drift - compensator(&nu, convention)?;
        Ok(Self {
            a,
            a_chol,
            nu,
            drift,
            convention,
            b0,
        })
    }

    /// Multivariate Black–Scholes in the mean convention with
    /// `μ_j = −a_jj/2`.
    pub fn black_scholes(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let mu = DVector::from_fn(n, |j, _| -0.5 * a[(j, j)]);
        Self::new(a, JumpMeasure::zero(n), mu, Convention::Mean)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn nu(&self) -> &JumpMeasure {
        &self.nu
    }

    pub fn drift(&self) -> &DVector<f64> {
        &self.drift
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Drift after removing every compensator.
    pub fn compound_drift(&self) -> &DVector<f64> {
        &self.b0
    }

    /// `E ξ_1`.
    pub fn mean(&self) -> DVector<f64> {
        &self.b0 + self.nu.first_moment()
    }

    /// Covariance of `ξ_1`, `A + ∫ x xᵀ dν`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.a + self.nu.second_moment()
    }

    /// The same process with its drift expressed in `target`.
    pub fn with_convention(&self, target: Convention) -> Result<Self> {
        if target == self.convention {
            return Ok(self.clone());
        }
        let drift = &self.b0 + compensator(&self.nu, target)?;
        Self::new(self.a.clone(), self.nu.clone(), drift, target)
    }

    /// Replaces one drift component (1-based) in the current convention.
    pub fn with_drift_component(&self, j: usize, value: f64) -> Result<Self> {
        check_index(j, self.dim())?;
        let mut d = self.drift.clone();
        d[j - 1] = value;
        Self::new(self.a.clone(), self.nu.clone(), d, self.convention)
    }

    pub fn with_drift(&self, drift: DVector<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.nu.clone(), drift, self.convention)
    }

    /// Triplet of `ξ_t`: `(tA, tν, t·drift)` for the mean convention.
    /// Truncated drifts are rescaled through the compound representation.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let nu = self.nu.scaled(t);
        let drift = &self.b0 * t + compensator(&nu, self.convention)?;
        Self::new(&self.a * t, nu, drift, self.convention)
    }

    /// `log E e^{i⟨u, ξ_1⟩}` for complex `u`.
    pub fn char_exponent(&self, u: &[Complex64]) -> Result<Complex64> {
        let n = self.dim();
        if u.len() != n {
            return Err(Error::Dimension { expected: n, got: u.len() });
        }
        let i = Complex64::i();
        let dot = |v: &DVector<f64>| -> Complex64 { u.iter().zip(v.iter()).map(|(a, b)| a * b).sum() };
        let quad = |m: &DMatrix<f64>| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..n {
                for c in 0..n {
                    s += u[r] * m[(r, c)] * u[c];
                }
            }
            s
        };
        let mut psi = i * dot(&self.b0) - 0.5 * quad(&self.a);
        for (x, q) in self.nu.atoms() {
            psi += *q * ((i * dot(x)).exp() - 1.0);
        }
        for g in self.nu.gaussians() {
            psi += g.mass() * ((i * dot(g.mean()) - 0.5 * quad(g.cov())).exp() - 1.0);
        }
        if !psi.re.is_finite() || !psi.im.is_finite() {
            return Err(Error::MomentStripViolation(format!("exponential moment diverges at u = {u:?}")));
        }
        Ok(psi)
    }

    /// Real `u` shifted by `−i·shift` in coordinate `j`.
    pub fn char_exponent_shifted(&self, u: &[f64], j: usize, shift: f64) -> Result<Complex64> {
        check_index(j, self.dim())?;
        let z: Vec<Complex64> = u
            .iter()
            .enumerate()
            .map(|(l, &v)| Complex64::new(v, if l == j - 1 { -shift } else { 0.0 }))
            .collect();
        self.char_exponent(&z)
    }

    /// Triplet under `dQ′/dQ ∝ e^{θ·ξ}`: `A` is unchanged, `ν′ = e^{θ·x}ν`
    /// and the drift moves by `Aθ` plus the tilt of the compensator.
    pub fn esscher(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let th = DVector::from_column_slice(theta);
        let nu = self.nu.tilted(theta)?;
        let b0 = &self.b0 + &self.a * &th;
        let drift = b0 + compensator(&nu, self.convention)?;
        Self::new(self.a.clone(), nu, drift, self.convention)
    }

    /// Increment `ξ_{t+dt} − ξ_t`: Gaussian part plus compound Poisson
    /// jumps.
    pub fn sample_increment(&self, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.sample_increment_into(dt, rng, &mut out)?;
        Ok(out)
    }

    /// Writes the increment into `out` and returns the number of jumps.
    #[allow(clippy::needless_range_loop)]
    pub fn sample_increment_into(&self, dt: f64, rng: &mut RngStream, out: &mut [f64]) -> Result<u64> {
        let n = self.dim();
        if !(dt > 0.0) {
            return Err(crate::error::domain("time step must be positive"));
        }
        let sq = dt.sqrt();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for r in 0..n {
            let mut s = self.b0[r] * dt;
            for c in 0..=r {
                s += self.a_chol[(r, c)] * z[c] * sq;
            }
            out[r] = s;
        }
        let mass = self.nu.total_mass();
        let mut count = 0;
        if mass > 0.0 {
            count = Poisson::new(mass * dt).map_err(|_| Error::InfiniteActivity)?.sample(rng) as u64;
            for _ in 0..count {
                self.add_jump(mass, rng, out);
            }
        }
        Ok(count)
    }

    #[allow(clippy::needless_range_loop)]
    fn add_jump(&self, mass: f64, rng: &mut RngStream, out: &mut [f64]) {
        let mut pick = rng.open01() * mass;
        for (x, q) in self.nu.atoms() {
            if pick < *q {
                out.iter_mut().zip(x.iter()).for_each(|(o, v)| *o += v);
                return;
            }
            pick -= q;
        }
        let gs = self.nu.gaussians();
        let k = gs
            .iter()
            .position(|g| {
                let hit = pick < g.mass();
                pick -= g.mass();
                hit
            })
            .unwrap_or(gs.len() - 1);
        let g = &gs[k];
        let n = self.dim();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for r in 0..n {
            let mut s = g.mean()[r];
            for c in 0..=r {
                s += g.chol()[(r, c)] * z[c];
            }
            out[r] += s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(s2: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[s2, 0.5 * s2, 0.5 * s2, s2])
    }

    fn jumpy() -> LevyTriplet {
        let g = GaussianJumps::tilted(pattern(0.09), DVector::zeros(2), 1.0, 0.5, 1).unwrap();
        let nu = JumpMeasure::zero(2).with_gaussian(g).unwrap().with_atom(&[0.3, -0.2], 0.4).unwrap();
        LevyTriplet::new(pattern(0.04), nu, DVector::from_column_slice(&[0.01, -0.03]), Convention::Truncated(Ball::Triple { i: 1 })).unwrap()
    }

    #[test]
    fn pure_gaussian_exponent() {
        let t = LevyTriplet::black_scholes(pattern(0.04)).unwrap();
        let u = [Complex64::new(0.7, 0.0), Complex64::new(-0.4, 0.0)];
        let psi = t.char_exponent(&u).unwrap();
        let mu = [-0.02, -0.02];
        let a = pattern(0.04);
        let quad = 0.7 * 0.7 * a[(0, 0)] + 2.0 * 0.7 * -0.4 * a[(0, 1)] + 0.16 * a[(1, 1)];
        let expect = Complex64::new(-0.5 * quad, 0.7 * mu[0] - 0.4 * mu[1]);
        assert!((psi - expect).norm() < 1e-15);
        assert_eq!(t.char_exponent(&[Complex64::new(0.0, 0.0); 2]).unwrap(), Complex64::new(0.0, 0.0));
        // E e^{ξ_j} = 1
        for j in 1..=2 {
            assert!(t.char_exponent_shifted(&[0.0, 0.0], j, 1.0).unwrap().norm() < 1e-16);
        }
    }

    #[test]
    fn conventions_are_reparametrizations() {
        let t = jumpy();
        let u = [Complex64::new(0.3, -0.5), Complex64::new(1.1, 0.0)];
        let base = t.char_exponent(&u).unwrap();
        for c in [Convention::Mean, Convention::Truncated(Ball::Euclidean), Convention::Truncated(Ball::Triple { i: 2 })] {
            let s = t.with_convention(c).unwrap();
            assert!((s.char_exponent(&u).unwrap() - base).norm() < 1e-12);
            let back = s.with_convention(t.convention()).unwrap();
            assert!((back.drift() - t.drift()).norm() < 1e-12);
        }
    }

    #[test]
    fn esscher_group_and_invariance() {
        let t = jumpy();
        let e = t.esscher(&[0.4, -0.7]).unwrap();
        assert_eq!(e.a(), t.a());
        let back = e.esscher(&[-0.4, 0.7]).unwrap();
        assert!((back.drift() - t.drift()).norm() < 1e-12);
        assert!((back.nu().total_mass() - t.nu().total_mass()).abs() < 1e-12);
        let same = t.esscher(&[0.0, 0.0]).unwrap();
        assert!((same.drift() - t.drift()).norm() < 1e-14);
        // characteristic function of the tilted law: ψ′(u) = ψ(u − iθ) − ψ(−iθ)
        let th = [0.4, -0.7];
        let u = [0.2, 0.9];
        let lhs = e.char_exponent(&u.map(|v| Complex64::new(v, 0.0))).unwrap();
        let sh = |w: &[f64]| -> Vec<Complex64> { w.iter().zip(th).map(|(&a, b)| Complex64::new(a, -b)).collect() };
        let rhs = t.char_exponent(&sh(&u)).unwrap() - t.char_exponent(&sh(&[0.0, 0.0])).unwrap();
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn esscher_atom_example() {
        let nu = JumpMeasure::zero(1).with_atom(&[1.0], 0.8).unwrap();
        let t = LevyTriplet::new(DMatrix::zeros(1, 1), nu, DVector::zeros(1), Convention::Mean).unwrap();
        let e = t.esscher(&[0.5]).unwrap();
        assert!((e.nu().atoms()[0].1 - 0.8 * 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn increments() {
        let z = LevyTriplet::new(DMatrix::zeros(2, 2), JumpMeasure::zero(2), DVector::zeros(2), Convention::Mean).unwrap();
        assert_eq!(z.sample_increment(0.3, &mut RngStream::new(1, 1)).unwrap(), vec![0.0, 0.0]);
        let t = jumpy();
        let a = t.sample_increment(0.5, &mut RngStream::new(9, 2)).unwrap();
        let b = t.sample_increment(0.5, &mut RngStream::new(9, 2)).unwrap();
        assert_eq!(a, b);
        assert!(t.sample_increment(0.0, &mut RngStream::new(9, 2)).is_err());
    }

    #[test]
    fn scaling_keeps_compound_drift_linear() {
        let t = jumpy();
        let s = t.scaled(2.0).unwrap();
        assert!((s.compound_drift() - t.compound_drift() * 2.0).norm() < 1e-14);
        let u = [Complex64::new(0.3, 0.0), Complex64::new(-0.2, 0.1)];
        assert!((s.char_exponent(&u).unwrap() - t.char_exponent(&u).unwrap() * 2.0).norm() < 1e-13);
    }
}

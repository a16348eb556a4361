//! Finite jump measures: weighted atoms plus Gaussian components.

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_index, domain, Error, Result};
use crate::linalg::{cholesky_psd, is_symmetric, k_matrix};
use crate::quad::{integrate, QuadConfig};

/// Truncation ball of the Lévy–Khintchine compensator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ball {
    /// `|||x||| ≤ 1` for the norm attached to numeraire `i` (1-based).
    Triple { i: usize },
    /// `‖x‖ ≤ 1`.
    Euclidean,
}

impl Ball {
    /// Matrix `Q` with `xᵀQx` the squared ball norm.
    pub fn quadratic_form(&self, n: usize) -> DMatrix<f64> {
        match *self {
            Ball::Euclidean => DMatrix::identity(n, n),
            Ball::Triple { i } => {
                let k = k_matrix(n, i);
                (DMatrix::identity(n, n) + k.transpose() * k) * 0.5
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Ball::Euclidean => x.iter().map(|v| v * v).sum::<f64>() <= 1.0,
            Ball::Triple { i } => triple_norm_sq(x, i) <= 1.0,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if let Ball::Triple { i } = *self {
            check_index(i, n)?;
        }
        Ok(())
    }
}

fn triple_norm_sq(u: &[f64], i: usize) -> f64 {
    let ui = u[i - 1];
    let e: f64 = u.iter().map(|v| v * v).sum();
    let k: f64 = u
        .iter()
        .enumerate()
        .map(|(l, &v)| if l == i - 1 { ui * ui } else { (v - ui) * (v - ui) })
        .sum();
    0.5 * (e + k)
}

/// `|||u||| = (½(‖u‖² + ‖K_i u‖²))^{1/2}`.
pub fn triple_norm(u: &[f64], i: usize) -> Result<f64> {
    check_index(i, u.len())?;
    Ok(triple_norm_sq(u, i).sqrt())
}

/// `mass · N(mean, cov)` as a jump component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJumps {
    mass: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianJumps {
    pub fn new(mass: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidModel(format!("jump mass must be positive, got {mass}")));
        }
        if cov.nrows() != mean.len() || !is_symmetric(&cov, 1e-12) {
            return Err(Error::InvalidModel("jump covariance must be symmetric and match the mean".into()));
        }
        let chol = cholesky_psd(&cov, 1e-12).ok_or_else(|| Error::InvalidModel("jump covariance is not PSD".into()))?;
        Ok(Self { mass, mean, cov, chol })
    }

    /// `mass · N(center − (α/2) B e_i, B)`, the density `e^{−(α/2)x_i}`
    /// tilt of a `K_i`-invariant Gaussian renormalized to `mass`.
    pub fn tilted(cov: DMatrix<f64>, center: DVector<f64>, alpha: f64, mass: f64, i: usize) -> Result<Self> {
        let n = cov.nrows();
        check_index(i, n)?;
        check_pattern(&cov, i)?;
        if center.len() != n {
            return Err(Error::Dimension { expected: n, got: center.len() });
        }
        if center[i - 1].abs() > 1e-14 {
            return Err(Error::PatternViolation {
                numeraire: i,
                detail: format!("center must satisfy c_i = 0, got {}", center[i - 1]),
            });
        }
        let mean = &center - cov.column(i - 1) * (0.5 * alpha);
        Self::new(mass, mean, cov)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Tilt order `α` with respect to numeraire `i` when the covariance has
    /// the `b_ij = b_ii/2` pattern.
    pub fn tilt_order(&self, i: usize) -> Option<f64> {
        let bii = self.cov[(i - 1, i - 1)];
        if bii <= 0.0 || check_pattern(&self.cov, i).is_err() {
            return None;
        }
        Some(-2.0 * self.mean[i - 1] / bii)
    }

    /// Same mass and `K_i`-invariant center, tilt order replaced by `alpha`.
    pub fn retilted(&self, i: usize, alpha: f64) -> Option<Self> {
        let a0 = self.tilt_order(i)?;
        let shift = self.cov.column(i - 1) * (0.5 * (alpha - a0));
        Some(Self {
            mass: self.mass,
            mean: &self.mean - shift,
            cov: self.cov.clone(),
            chol: self.chol.clone(),
        })
    }

    pub(crate) fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub(crate) fn scaled(&self, t: f64) -> Self {
        Self {
            mass: self.mass * t,
            ..self.clone()
        }
    }

    /// `mass · φ(x)`; `None` for a singular covariance.
    pub fn density(&self, x: &[f64]) -> Option<f64> {
        let n = self.dim();
        let det: f64 = (0..n).map(|j| self.chol[(j, j)]).product();
        if det <= 0.0 {
            return None;
        }
        let d = DVector::from_column_slice(x) - &self.mean;
        let z = self.chol.solve_lower_triangular(&d)?;
        Some(self.mass * (-0.5 * z.norm_squared()).exp() / ((2.0 * PI).powf(0.5 * n as f64) * det))
    }

    /// `∫ e^{θ·x} dν` for this component.
    pub fn laplace(&self, theta: &[f64]) -> f64 {
        let th = DVector::from_column_slice(theta);
        self.mass * (th.dot(&self.mean) + 0.5 * (self.cov.clone() * &th).dot(&th)).exp()
    }
}

pub(crate) fn check_pattern(b: &DMatrix<f64>, i: usize) -> Result<()> {
    let bii = b[(i - 1, i - 1)];
    for j in 0..b.nrows() {
        if j == i - 1 {
            continue;
        }
        for v in [b[(i - 1, j)], b[(j, i - 1)]] {
            if (v - 0.5 * bii).abs() > 1e-12 * (1.0 + bii.abs()) {
                return Err(Error::PatternViolation {
                    numeraire: i,
                    detail: format!("entry ({i},{}) = {v} but b_ii/2 = {}", j + 1, 0.5 * bii),
                });
            }
        }
    }
    Ok(())
}

/// Finite Lévy measure: atoms and Gaussian components.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    dim: usize,
    atoms: Vec<(DVector<f64>, f64)>,
    gaussians: Vec<GaussianJumps>,
}

impl JumpMeasure {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            gaussians: Vec::new(),
        }
    }

    pub fn with_atom(mut self, x: &[f64], mass: f64) -> Result<Self> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        if !(mass > 0.0 && mass.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("atoms need finite locations and positive mass".into()));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidModel("a Lévy measure has no atom at the origin".into()));
        }
        self.atoms.push((DVector::from_column_slice(x), mass));
        Ok(self)
    }

    pub fn with_gaussian(mut self, g: GaussianJumps) -> Result<Self> {
        if g.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: g.dim() });
        }
        self.gaussians.push(g);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(DVector<f64>, f64)] {
        &self.atoms
    }

    pub fn gaussians(&self) -> &[GaussianJumps] {
        &self.gaussians
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.gaussians.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.gaussians.iter().map(|g| g.mass).sum::<f64>()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            dim: self.dim,
            atoms: self.atoms.iter().map(|(x, m)| (x.clone(), m * t)).collect(),
            gaussians: self.gaussians.iter().map(|g| g.scaled(t)).collect(),
        }
    }


    /// `e^{θ·x} dν`.
    pub fn tilted(&self, theta: &[f64]) -> Result<Self> {
        let th = DVector::from_column_slice(theta);
        let atoms = self.atoms.iter().map(|(x, m)| (x.clone(), m * th.dot(x).exp())).collect::<Vec<_>>();
        let mut gaussians = Vec::with_capacity(self.gaussians.len());
        for g in &self.gaussians {
            let mean = &g.mean + &g.cov * &th;
            gaussians.push(GaussianJumps {
                mass: g.laplace(theta),
                mean,
                cov: g.cov.clone(),
                chol: g.chol.clone(),
            });
        }
        let out = Self {
            dim: self.dim,
            atoms,
            gaussians,
        };
        if !out.total_mass().is_finite() {
            return Err(Error::MomentStripViolation(format!("∫e^(θ·x)dν is not finite for θ = {theta:?}")));
        }
        Ok(out)
    }

    /// Density of the Gaussian part; `None` if any component is singular.
    pub fn gaussian_density(&self, x: &[f64]) -> Option<f64> {
        self.gaussians.iter().map(|g| g.density(x)).sum()
    }

    /// `∫ x dν`.
    pub fn first_moment(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for (x, q) in &self.atoms {
            m += x * *q;
        }
        for g in &self.gaussians {
            m += &g.mean * g.mass;
        }
        m
    }

    /// `∫ x xᵀ dν`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for (x, q) in &self.atoms {
            s += x * x.transpose() * *q;
        }
        for g in &self.gaussians {
            s += (&g.cov + &g.mean * g.mean.transpose()) * g.mass;
        }
        s
    }

    /// `∫ (e^{x_j} − 1) dν`, `j` 1-based.
    pub fn exp_minus_one(&self, j: usize) -> f64 {
        let a: f64 = self.atoms.iter().map(|(x, q)| q * x[j - 1].exp_m1()).sum();
        let g: f64 = self
            .gaussians
            .iter()
            .map(|g| g.mass * (g.mean[j - 1] + 0.5 * g.cov[(j - 1, j - 1)]).exp_m1())
            .sum();
        a + g
    }

    /// `∫ x_j e^{c x_j} dν` over the whole space.
    pub fn x_exp(&self, j: usize, c: f64) -> f64 {
        let a: f64 = self.atoms.iter().map(|(x, q)| q * x[j - 1] * (c * x[j - 1]).exp()).sum();
        let g: f64 = self
            .gaussians
            .iter()
            .map(|g| {
                let (m, v) = (g.mean[j - 1], g.cov[(j - 1, j - 1)]);
                g.mass * (c * m + 0.5 * c * c * v).exp() * (m + c * v)
            })
            .sum();
        a + g
    }

    /// `∫ f 1_ball dν`. Gaussian components are integrated in polar
    /// coordinates of the ball, which is implemented for `n ≤ 2`.
    pub fn ball_integral(&self, ball: Ball, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
        ball.validate(self.dim)?;
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|(x, _)| ball.contains(x.as_slice()))
            .map(|(x, q)| q * f(x.as_slice()))
            .sum();
        for g in &self.gaussians {
            total += gaussian_ball_integral(g, ball, f)?;
        }
        Ok(total)
    }

    /// `∫ x 1_ball dν`.
    pub fn ball_first_moment(&self, ball: Ball) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim);
        for j in 0..self.dim {
            out[j] = self.ball_integral(ball, &|x| x[j])?;
        }
        Ok(out)
    }
}

fn gaussian_ball_integral(g: &GaussianJumps, ball: Ball, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let n = g.dim();
    let cfg = QuadConfig::tight();
    match n {
        1 => {
            let r = integrate(
                |x| f(&[x]) * g.density(&[x]).unwrap_or(0.0),
                -1.0,
                1.0,
                &[g.mean[0].clamp(-1.0, 1.0), 0.0],
                &cfg,
            )?;
            if g.density(&[0.0]).is_none() {
                return Err(Error::InvalidModel("degenerate Gaussian jumps".into()));
            }
            Ok(r.value)
        }
        2 => {
            if g.density(&[0.0, 0.0]).is_none() {
                return Err(Error::InvalidModel("ball integrals need a nonsingular jump covariance".into()));
            }
            // x = R y with Q = L Lᵀ and R = L^{-T}, so the ball is ‖y‖ ≤ 1
            let q = ball.quadratic_form(2);
            let l = q.cholesky().ok_or_else(|| domain("ball form is not positive definite"))?.l();
            let r = l.transpose().try_inverse().ok_or_else(|| domain("singular ball form"))?;
            let jac = r.determinant().abs();
            let failure: Cell<Option<Error>> = Cell::new(None);
            let inner = |theta: f64| -> f64 {
                let (s, c) = theta.sin_cos();
                let dir = &r * DVector::from_column_slice(&[c, s]);
                let h = |rho: f64| {
                    let x = [rho * dir[0], rho * dir[1]];
                    f(&x) * g.density(&x).unwrap_or(0.0) * rho
                };
                match integrate(h, 0.0, 1.0, &[], &cfg) {
                    Ok(v) => v.value,
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                }
            };
            let out = integrate(inner, 0.0, 2.0 * PI, &[0.5 * PI, PI, 1.5 * PI], &cfg)?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            Ok(out.value * jac)
        }
        _ => Err(Error::InvalidModel(format!(
            "truncated-ball integrals of Gaussian jumps are implemented for n ≤ 2, got n = {n}; use the mean convention"
        ))),
    }
}

//! Order `α` of quasi-self-duality from
//! `a_ii α = a_ii − 2λ_i + 2∫(e^{x_i} − 1 − x_i e^{(α/2)x_i} 1_{|||x|||≤1}) dν`.
//!
//! Gaussian jump components with the `K_i` covariance pattern are treated as
//! a family: at each trial `α` they are re-tilted to order `α` with mass and
//! invariant center held fixed. For such a component the `x_i e^{(α/2)x_i}`
//! term integrates to zero over any `K_i`-invariant set. Atoms and other
//! Gaussian components are held fixed.

use rayon::prelude::*;
use serde::Serialize;

use super::{Ball, Convention, GaussianJumps, JumpMeasure, LevyTriplet};
use crate::error::{check_index, domain, Error, Result};
use crate::special::lambert_w0_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMethod {
    ClosedLognormal,
    ClosedLambertw,
    ClosedLaplace,
    BracketedRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSolution {
    pub alpha: f64,
    pub method: AlphaMethod,
    /// Scan cell that contained the root.
    pub bracket: Option<(f64, f64)>,
    /// Value of the defining equation at `alpha`.
    pub residual: f64,
    /// Root-finder value, also reported when a closed form was used.
    pub root_finder: Option<f64>,
}

struct Equation<'a> {
    t: &'a LevyTriplet,
    i: usize,
    lambda: f64,
    family: Vec<GaussianJumps>,
    fixed: JumpMeasure,
}

impl<'a> Equation<'a> {
    fn new(t: &'a LevyTriplet, i: usize, lambda: f64) -> Result<Self> {
        let mut family = Vec::new();
        let mut fixed = JumpMeasure::zero(t.dim());
        for (x, q) in t.nu().atoms() {
            fixed = fixed.with_atom(x.as_slice(), *q)?;
        }
        for g in t.nu().gaussians() {
            if g.tilt_order(i).is_some() {
                family.push(g.clone());
            } else {
                fixed = fixed.with_gaussian(g.clone())?;
            }
        }
        Ok(Self { t, i, lambda, family, fixed })
    }

    fn eval(&self, alpha: f64) -> Result<f64> {
        let i = self.i;
        let aii = self.t.a()[(i - 1, i - 1)];
        let mut jumps = self.fixed.exp_minus_one(i);
        for g in &self.family {
            let r = g.retilted(i, alpha).expect("pattern checked");
            jumps += r.mass() * (r.mean()[i - 1] + 0.5 * r.cov()[(i - 1, i - 1)]).exp_m1();
        }
        let c = 0.5 * alpha;
        jumps -= match self.t.convention() {
            Convention::Mean => self.fixed.x_exp(i, c),
            Convention::Truncated(_) => self.fixed.ball_integral(Ball::Triple { i }, &|x| x[i - 1] * (c * x[i - 1]).exp())?,
        };
        Ok(aii * (1.0 - alpha) - 2.0 * self.lambda + 2.0 * jumps)
    }
}

fn scan_grid() -> Vec<f64> {
    let m = 160;
    let pos: Vec<f64> = (0..=m).map(|k| 1e-3 * (5e4f64).powf(k as f64 / m as f64)).collect();
    let mut g: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    g.push(0.0);
    g.extend(pos);
    g
}

fn bisect(eq: &Equation, mut lo: f64, mut hi: f64, mut glo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = eq.eval(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    // Newton polish with a central difference
    let gx = eq.eval(x)?;
    let h = 1e-6 * (1.0 + x.abs());
    let d = (eq.eval(x + h)? - eq.eval(x - h)?) / (2.0 * h);
    if d != 0.0 && d.is_finite() {
        let y = x - gx / d;
        if y.is_finite() && eq.eval(y)?.abs() < gx.abs() {
            x = y;
        }
    }
    Ok(x)
}

fn bracketed_roots(eq: &Equation) -> Result<Vec<(f64, (f64, f64))>> {
    let grid = scan_grid();
    let vals = grid.par_iter().map(|&a| eq.eval(a)).collect::<Result<Vec<f64>>>()?;
    let mut roots = Vec::new();
    for k in 0..grid.len() - 1 {
        let (a, b) = (grid[k], grid[k + 1]);
        let (ga, gb) = (vals[k], vals[k + 1]);
        if ga == 0.0 {
            roots.push((a, (a, a)));
        } else if gb != 0.0 && (ga > 0.0) != (gb > 0.0) {
            roots.push((bisect(eq, a, b, ga)?, (a, b)));
        }
    }
    if *vals.last().unwrap() == 0.0 {
        let b = *grid.last().unwrap();
        roots.push((b, (b, b)));
    }
    Ok(roots)
}

/// Solves for the order `α` with respect to numeraire `i` and carrying cost
/// `lambda_i`, using a closed form where the triplet has one and the
/// scanned root-finder otherwise.
pub fn solve_alpha(t: &LevyTriplet, i: usize, lambda_i: f64) -> Result<AlphaSolution> {
    check_index(i, t.dim())?;
    let aii = t.a()[(i - 1, i - 1)];
    let nu = t.nu();
    let jumps_move_i = nu.atoms().iter().any(|(x, _)| x[i - 1] != 0.0)
        || nu.gaussians().iter().any(|g| g.cov()[(i - 1, i - 1)] > 0.0 || g.mean()[i - 1] != 0.0);
    if !(aii > 0.0) && !jumps_move_i {
        return Err(domain(format!("coordinate {i} is deterministic; α is undefined")));
    }
    let eq = Equation::new(t, i, lambda_i)?;

    let closed = if nu.is_zero() {
        Some((1.0 - 2.0 * lambda_i / aii, AlphaMethod::ClosedLognormal))
    } else if nu.atoms().is_empty() && nu.gaussians().len() == 1 && eq.family.len() == 1 {
        let g = &eq.family[0];
        let (m, b) = (g.mass(), g.cov()[(i - 1, i - 1)]);
        if aii == 0.0 {
            let arg = 1.0 + lambda_i / m;
            if arg <= 0.0 {
                return Err(domain(format!("no real α: 1 + λ/M = {arg} ≤ 0")));
            }
            Some((1.0 - 2.0 / b * arg.ln(), AlphaMethod::ClosedLaplace))
        } else {
            let l = (m * b / aii).ln() + b * (lambda_i + m) / aii;
            let w = lambert_w0_exp(l)?;
            Some((1.0 - 2.0 * (lambda_i + m) / aii + 2.0 * w / b, AlphaMethod::ClosedLambertw))
        }
    } else {
        None
    };

    let found = bracketed_roots(&eq);
    match closed {
        Some((alpha, method)) => {
            let (root_finder, bracket) = match &found {
                Ok(r) if r.len() == 1 => (Some(r[0].0), Some(r[0].1)),
                _ => (None, None),
            };
            Ok(AlphaSolution {
                alpha,
                method,
                bracket,
                residual: eq.eval(alpha)?,
                root_finder,
            })
        }
        None => {
            let roots = found?;
            match roots.len() {
                0 => Err(Error::NoBracket { lo: -50.0, hi: 50.0 }),
                1 => {
                    let (alpha, bracket) = roots[0];
                    Ok(AlphaSolution {
                        alpha,
                        method: AlphaMethod::BracketedRoot,
                        bracket: Some(bracket),
                        residual: eq.eval(alpha)?,
                        root_finder: Some(alpha),
                    })
                }
                _ => Err(Error::AmbiguousRoot {
                    roots: roots.into_iter().map(|r| r.0).collect(),
                }),
            }
        }
    }
}

//! Builds library objects from a validated spec and dispatches the task.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use selfdual::dist::{Law, MultiLogNormal, ScalarModel, VectorModel};
use selfdual::duality::{
    check_density_self_dual, check_discrete_self_dual_scalar, check_integrated_tail_symmetry, check_joint_self_duality, check_moment_and_skewness,
    check_payoff_symmetry, check_quasi_self_dual, default_grid, log_grid, random_test_vectors, McSettings, PayoffFamily,
};
use selfdual::geometry::{boundary_polyline, support_lift_max_zonoid, support_lift_zonoid, BoundaryPoint, LiftVector, Method};
use selfdual::hedging::{
    build_hedge, build_super_hedge, evaluate_hedge, evaluate_joint_hedge, two_asset_joint_hedges, Barrier, HedgeReport, HedgeSettings, JointClaim, Knock,
    PathConfig,
};
use selfdual::levy::{bridge_residual, check_qsd_triplet, martingale_normalized, solve_alpha, AlphaSolution, Ball, Convention, GaussianJumps, JumpMeasure, LevyTriplet};
use selfdual::pricing::{price, Payoff, PriceEstimate};
use selfdual::report::{Bands, ReportBuilder};
use selfdual::{Error, RngStream, SymmetryReport, Verdict};

use crate::error::CliError;
use crate::spec::{AlphaSpec, ModelSpec, PayoffSpec, ScalarSpec, TaskKind, TripletSpec, VectorSpec};

#[derive(Debug, Clone, Serialize)]
pub struct SupportRow {
    pub vector: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
}

/// Everything a task produced.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Outcome {
    pub task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<PriceEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hedge: Option<HedgeReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<SupportRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<BoundaryPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<SymmetryReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Outcome {
    /// 0 pass (or no verdict), 1 fail, 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            None | Some(Verdict::Pass) => 0,
            Some(Verdict::Fail) => 1,
            Some(Verdict::Inconclusive) => 2,
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, rows.first().map_or(0, |r| r.len()), |r, c| rows[r][c])
}

pub fn scalar_model(s: &ScalarSpec) -> selfdual::Result<ScalarModel> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidModel(format!("missing {name}")));
    match s.family.as_deref().unwrap_or("") {
        "lognormal" => ScalarModel::lognormal(s.mu.unwrap_or(0.0), need(s.sigma, "sigma")?),
        "self_dual_lognormal" => ScalarModel::self_dual_lognormal(need(s.sigma, "sigma")?),
        "lp" => ScalarModel::lp_self_dual(need(s.p, "p")?),
        "heavy_tail" => ScalarModel::heavy_tail(need(s.gamma, "gamma")?),
        "atoms" => ScalarModel::atoms(s.atoms.iter().flatten().map(|r| (r[0], r[1])).collect()),
        "unit" => Ok(ScalarModel::unit()),
        other => Err(Error::InvalidModel(format!("unknown scalar family {other}"))),
    }
}

pub fn vector_model(v: &VectorSpec) -> selfdual::Result<VectorModel> {
    let factors = || -> selfdual::Result<Vec<ScalarModel>> { v.factors.iter().flatten().map(scalar_model).collect() };
    match v.family.as_deref().unwrap_or("") {
        "multilognormal" => {
            let cov = matrix(v.cov.as_deref().unwrap_or(&[]));
            let mu = DVector::from_vec(v.mu.clone().unwrap_or_default());
            Ok(VectorModel::MultiLogNormal(MultiLogNormal::new(mu, cov)?))
        }
        "jointly_self_dual" => Ok(VectorModel::MultiLogNormal(MultiLogNormal::jointly_self_dual(
            v.n.unwrap_or(2) as usize,
            v.sigma2.unwrap_or(0.25),
        )?)),
        "unit_ball_max" => VectorModel::unit_ball_max(v.n.unwrap_or(2) as usize),
        "common_factor" => VectorModel::common_factor(factors()?),
        "independent" => VectorModel::independent(factors()?),
        other => Err(Error::InvalidModel(format!("unknown vector family {other}"))),
    }
}

pub fn triplet(t: &TripletSpec) -> selfdual::Result<LevyTriplet> {
    let a = matrix(t.a.as_deref().unwrap_or(&[]));
    let n = a.nrows();
    let mut nu = JumpMeasure::zero(n);
    for x in t.atoms.iter().flatten() {
        nu = nu.with_atom(&x.x, x.mass)?;
    }
    for g in t.gaussians.iter().flatten() {
        nu = nu.with_gaussian(GaussianJumps::new(g.mass, DVector::from_vec(g.mean.clone()), matrix(&g.cov))?)?;
    }
    for g in t.tilted.iter().flatten() {
        let tg = GaussianJumps::tilted(matrix(&g.cov), DVector::from_vec(g.center.clone()), g.alpha, g.mass, g.numeraire as usize)?;
        nu = nu.with_gaussian(tg)?;
    }
    let convention = match t.convention.as_deref().unwrap_or("mean") {
        "mean" => Convention::Mean,
        "truncated_triple" => Convention::Truncated(Ball::Triple {
            i: t.ball_numeraire.unwrap_or(1) as usize,
        }),
        _ => Convention::Truncated(Ball::Euclidean),
    };
    let drift = DVector::from_vec(t.drift.clone().unwrap_or_else(|| vec![0.0; n]));
    let lt = LevyTriplet::new(a, nu, drift, convention)?;
    if t.normalize.unwrap_or(true) {
        martingale_normalized(&lt)
    } else {
        Ok(lt)
    }
}

pub fn payoff(p: &PayoffSpec, n: usize) -> selfdual::Result<Payoff> {
    let k = p.k.unwrap_or(0.0);
    let u = || p.u.clone().unwrap_or_else(|| vec![1.0; n]);
    let idx = |v: Option<i64>| v.unwrap_or(1) as usize;
    let po = match p.kind.as_deref().unwrap_or("") {
        "call" => Payoff::call(k),
        "put" => Payoff::put(k),
        "basket_call" => Payoff::BasketCall { u: u(), k },
        "basket_put" => Payoff::BasketPut { u: u(), k },
        "max" => Payoff::MaxOption { u0: p.u0.unwrap_or(0.0), u: u() },
        "binary_call" => Payoff::BinaryCall { k, j: idx(p.j) },
        "binary_put" => Payoff::BinaryPut { k, j: idx(p.j) },
        "gap_call" => Payoff::GapCall { k, j: idx(p.j) },
        "gap_put" => Payoff::GapPut { k, j: idx(p.j) },
        "spread" => Payoff::SpreadCall {
            long: p.long.clone().unwrap_or_default(),
            short: p.short.clone().unwrap_or_default(),
            k,
        },
        "power_call" => Payoff::PowerCall {
            u: u(),
            k,
            alpha: p.alpha.unwrap_or(1.0),
        },
        "linear" => Payoff::Linear { u0: p.u0.unwrap_or(0.0), u: u() },
        "forward_min" => Payoff::ForwardMinLeg {
            i: idx(p.i),
            j: p.j.unwrap_or(2) as usize,
            k,
        },
        other => return Err(Error::InvalidModel(format!("unknown payoff kind {other}"))),
    };
    po.validate(n)?;
    Ok(po)
}

fn bands(spec: &ModelSpec) -> Bands {
    let t = &spec.tolerance;
    Bands {
        se_band: t.se_band.unwrap_or(3.0),
        exact_tol: t.exact.unwrap_or(1e-10),
        resolution_floor: t.resolution.unwrap_or(1e-3),
    }
}

fn mc_settings(spec: &ModelSpec) -> McSettings {
    McSettings {
        n_samples: spec.samples as usize,
        bands: bands(spec),
        ..McSettings::default()
    }
}

fn lambda_vec(spec: &ModelSpec, n: usize) -> Vec<f64> {
    let v = spec.task.lambda.as_ref().map(|l| l.to_vec()).unwrap_or_default();
    match v.len() {
        0 => vec![0.0; n],
        1 => vec![v[0]; n],
        _ => v,
    }
}

fn run_check(spec: &ModelSpec, rng: &mut RngStream, out: &mut Outcome) -> Result<(), CliError> {
    let which = spec.task.which.as_deref().unwrap_or("auto");
    let i = spec.task.numeraire.unwrap_or(1) as usize;
    let b = bands(spec);
    let settings = mc_settings(spec);
    let m = CliError::module("duality");
    if let Some(sc) = &spec.model.scalar {
        let model = scalar_model(sc).map_err(CliError::module("dist"))?;
        let z = log_grid(0.1, 10.0, 50);
        let want = |name: &str| which == name || (which == "auto" && (name != "payoff"));
        if model.is_atomic() {
            if let ScalarModel::DiscreteAtoms(a) = &model {
                if want("discrete") {
                    out.reports.push(check_discrete_self_dual_scalar(a).map_err(CliError::module("duality"))?);
                }
            }
        } else if want("density") {
            let grid: Vec<Vec<f64>> = log_grid(0.1, 10.0, 100).into_iter().map(|x| vec![x]).collect();
            out.reports.push(check_density_self_dual(&model, 1, &grid).map_err(CliError::module("duality"))?);
        }
        if want("integrated_tail") {
            out.reports.push(check_integrated_tail_symmetry(&model, &z).map_err(CliError::module("duality"))?);
        }
        if want("moments") {
            match check_moment_and_skewness(&model) {
                Ok(r) => out.reports.push(r),
                Err(e @ Error::MomentDiverges { .. }) if which == "auto" => out.notes.push(format!("moments skipped: {e}")),
                Err(e) => return Err(m(e)),
            }
        }
        if which == "payoff" {
            let vs = random_test_vectors(1, PayoffFamily::Basket, settings.n_vectors, settings.design_seed);
            out.reports.push(check_payoff_symmetry(&model, 1, PayoffFamily::Basket, &vs, rng, settings.n_samples, b).map_err(m)?);
        }
    } else if let Some(vs) = &spec.model.vector {
        let model = vector_model(vs).map_err(CliError::module("dist"))?;
        let n = model.dim();
        match which {
            "density" => out.reports.push(check_density_self_dual(&model, i, &default_grid(n)).map_err(m)?),
            "joint" => out.reports.push(check_joint_self_duality(&model, rng, &settings).map_err(m)?),
            "qsd" => {
                let alpha = match spec.task.alpha {
                    Some(AlphaSpec::Value(a)) => a,
                    _ => return Err(CliError::Schema(vec!["task.alpha: qsd check needs a numeric α".into()])),
                };
                let lam = lambda_vec(spec, n);
                out.reports.push(check_quasi_self_dual(&model, i, &lam, alpha, rng, &settings).map_err(m)?);
            }
            "auto" | "payoff" => {
                for fam in [PayoffFamily::Basket, PayoffFamily::Max] {
                    let tv = random_test_vectors(n, fam, settings.n_vectors, settings.design_seed);
                    out.reports.push(check_payoff_symmetry(&model, i, fam, &tv, rng, settings.n_samples, b).map_err(CliError::module("duality"))?);
                }
            }
            other => return Err(CliError::Schema(vec![format!("task.which: \"{other}\" does not apply to vector models")])),
        }
    } else if let Some(ts) = &spec.model.triplet {
        let lm = CliError::module("levy");
        let t = triplet(ts).map_err(CliError::module("levy"))?;
        let n = t.dim();
        let lam = lambda_vec(spec, n)[i - 1];
        let alpha = match spec.task.alpha {
            Some(AlphaSpec::Value(a)) => a,
            Some(AlphaSpec::Keyword(_)) => solve_alpha(&t, i, lam).map_err(CliError::module("levy"))?.alpha,
            None => 1.0,
        };
        out.reports.push(check_qsd_triplet(&t, i, lam, alpha, b.exact_tol).map_err(CliError::module("levy"))?);
        let mut rb = ReportBuilder::new(format!("bridge_identity[i={i}]"), b);
        for _ in 0..50 {
            let v: Vec<f64> = (0..n).map(|_| 4.0 * rng.open01() - 2.0).collect();
            let r = bridge_residual(&t, i, &v, alpha, lam).map_err(lm)?;
            rb.exact("bridge", v, r);
        }
        out.reports.push(rb.finish());
    }
    out.verdict = Some(out.reports.iter().fold(Verdict::Pass, |v, r| v.and(r.verdict)));
    Ok(())
}

fn run_hedge(spec: &ModelSpec, rng: &mut RngStream, out: &mut Outcome) -> Result<(), CliError> {
    let ps = spec.model.paths.as_ref().expect("validated");
    let driver = triplet(spec.model.triplet.as_ref().expect("validated")).map_err(CliError::module("levy"))?;
    let s0 = ps.s0.clone().unwrap_or_default();
    let cfg = PathConfig::new(s0.clone(), ps.lambda.clone().unwrap_or_default(), driver, ps.horizon.unwrap_or(1.0), ps.steps.unwrap_or(250) as usize)
        .map_err(CliError::module("hedging"))?
        .with_bridge_correction(ps.bridge.unwrap_or(false));
    let t = &spec.task;
    let mut settings = HedgeSettings {
        n_outer: t.n_outer.unwrap_or(10_000) as usize,
        n_inner: t.n_inner.unwrap_or(20_000) as usize,
        n_states: t.n_states.unwrap_or(50) as usize,
        ..HedgeSettings::default()
    };
    settings.bands.se_band = bands(spec).se_band;
    let hm = CliError::module("hedging");
    let report = if let Some(j) = &t.joint {
        let claim = if j.claim == "x" { JointClaim::X { k: j.k } } else { JointClaim::Y { k: j.k } };
        let plan = two_asset_joint_hedges(&cfg, claim).map_err(CliError::module("hedging"))?;
        evaluate_joint_hedge(&plan, &cfg, &settings, rng).map_err(hm)?
    } else {
        let b = t.barrier.as_ref().expect("validated");
        let barrier = Barrier::new(b.asset as usize, b.level, &s0).map_err(CliError::module("hedging"))?;
        let target = payoff(t.payoff.as_ref().expect("validated"), cfg.dim()).map_err(CliError::module("pricing"))?;
        let alpha = match &t.alpha {
            Some(AlphaSpec::Value(a)) => *a,
            _ => {
                let sol = solve_alpha(cfg.driver(), barrier.i, cfg.lambda()[barrier.i - 1]).map_err(CliError::module("levy"))?;
                out.alpha = Some(sol.clone());
                sol.alpha
            }
        };
        let plan = match t.knock.as_deref().unwrap_or("in") {
            "super" => build_super_hedge(&target, barrier, alpha),
            "out" => build_hedge(&target, barrier, alpha, Knock::Out),
            _ => build_hedge(&target, barrier, alpha, Knock::In),
        }
        .map_err(CliError::module("hedging"))?;
        out.notes.extend(plan.notes.iter().cloned());
        out.notes.push(format!("hedge form: {:?}", plan.form));
        evaluate_hedge(&plan, &cfg, &settings, rng).map_err(hm)?
    };
    out.verdict = Some(report.verdict);
    out.hedge = Some(report);
    Ok(())
}

fn with_law<R>(spec: &ModelSpec, f: impl FnOnce(&dyn Law) -> Result<R, CliError>) -> Result<R, CliError> {
    if let Some(sc) = &spec.model.scalar {
        f(&scalar_model(sc).map_err(CliError::module("dist"))?)
    } else {
        let v = spec.model.vector.as_ref().expect("validated");
        f(&vector_model(v).map_err(CliError::module("dist"))?)
    }
}

/// Runs the task of a validated spec.
pub fn run(spec: &ModelSpec) -> Result<Outcome, CliError> {
    let mut rng = RngStream::new(spec.seed, 0);
    let kind = spec.kind();
    let mut out = Outcome {
        task: kind.name().into(),
        ..Outcome::default()
    };
    let n_samples = spec.samples as usize;
    match kind {
        TaskKind::Check => run_check(spec, &mut rng, &mut out)?,
        TaskKind::Alpha => {
            let t = triplet(spec.model.triplet.as_ref().expect("validated")).map_err(CliError::module("levy"))?;
            let i = spec.task.numeraire.unwrap_or(1) as usize;
            let lam = lambda_vec(spec, t.dim());
            if i == 0 || i > t.dim() {
                return Err(CliError::module("levy")(Error::Index { index: i, dim: t.dim() }));
            }
            out.alpha = Some(solve_alpha(&t, i, lam[i - 1]).map_err(CliError::module("levy"))?);
        }
        TaskKind::Price => {
            let p = with_law(spec, |law| {
                let n = law.dim();
                let po = payoff(spec.task.payoff.as_ref().expect("validated"), n).map_err(CliError::module("pricing"))?;
                let fwd = spec.task.forward.clone().unwrap_or_else(|| vec![1.0; n]);
                price(law, &fwd, &po, spec.task.rate.unwrap_or(0.0), spec.task.maturity.unwrap_or(1.0), &mut rng, n_samples).map_err(CliError::module("pricing"))
            })?;
            out.price = Some(p);
        }
        TaskKind::Hedge => run_hedge(spec, &mut rng, &mut out)?,
        TaskKind::Zonoid => {
            let rows = with_law(spec, |law| {
                let mut rows = Vec::new();
                for v in spec.task.vectors.iter().flatten() {
                    let lv = LiftVector::from_full(v).map_err(CliError::module("geometry"))?;
                    if lv.dim() != law.dim() {
                        return Err(CliError::module("geometry")(Error::Dimension {
                            expected: law.dim(),
                            got: lv.dim(),
                        }));
                    }
                    let est = if spec.task.max.unwrap_or(false) {
                        support_lift_max_zonoid(law, &lv, &mut rng, n_samples)
                    } else {
                        support_lift_zonoid(law, &lv, &mut rng, n_samples)
                    }
                    .map_err(CliError::module("geometry"))?;
                    rows.push(SupportRow {
                        vector: v.clone(),
                        value: est.value,
                        std_error: est.std_error,
                        method: est.method,
                    });
                }
                Ok(rows)
            })?;
            out.support = rows;
            if let Some(b) = &spec.task.boundary {
                let sc = spec
                    .model
                    .scalar
                    .as_ref()
                    .ok_or_else(|| CliError::Schema(vec!["task.boundary: needs a scalar model".into()]))?;
                let model = scalar_model(sc).map_err(CliError::module("dist"))?;
                out.boundary = boundary_polyline(&model, b.k_min, b.k_max, b.points as usize).map_err(CliError::module("geometry"))?;
            }
        }
    }
    Ok(out)
}

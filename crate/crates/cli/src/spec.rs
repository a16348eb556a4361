//! Typed spec document with defaults and semantic validation.

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::schema::{check_table, ROOT};

pub const SPEC_VERSION: i64 = 1;
pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Check,
    Alpha,
    Price,
    Hedge,
    Zonoid,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Check => "check",
            TaskKind::Alpha => "alpha",
            TaskKind::Price => "price",
            TaskKind::Hedge => "hedge",
            TaskKind::Zonoid => "zonoid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub exact: Option<f64>,
    pub se_band: Option<f64>,
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub family: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub atoms: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpec {
    pub family: Option<String>,
    pub n: Option<i64>,
    pub sigma2: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub cov: Option<Vec<Vec<f64>>>,
    pub factors: Option<Vec<ScalarSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub mass: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltedSpec {
    pub mass: f64,
    pub center: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub alpha: f64,
    pub numeraire: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSpec {
    pub a: Option<Vec<Vec<f64>>>,
    pub drift: Option<Vec<f64>>,
    pub normalize: Option<bool>,
    pub convention: Option<String>,
    pub ball_numeraire: Option<i64>,
    pub atoms: Option<Vec<AtomSpec>>,
    pub gaussians: Option<Vec<GaussianSpec>>,
    pub tilted: Option<Vec<TiltedSpec>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSpec {
    pub s0: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub steps: Option<i64>,
    pub bridge: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub scalar: Option<ScalarSpec>,
    pub vector: Option<VectorSpec>,
    pub triplet: Option<TripletSpec>,
    pub paths: Option<PathsSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSpec {
    pub kind: Option<String>,
    pub k: Option<f64>,
    pub u: Option<Vec<f64>>,
    pub u0: Option<f64>,
    pub long: Option<Vec<f64>>,
    pub short: Option<Vec<f64>>,
    pub i: Option<i64>,
    pub j: Option<i64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    pub asset: i64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub claim: String,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub k_min: f64,
    pub k_max: f64,
    pub points: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: Option<TaskKind>,
    pub which: Option<String>,
    pub numeraire: Option<i64>,
    pub lambda: Option<OneOrMany>,
    pub alpha: Option<AlphaSpec>,
    pub payoff: Option<PayoffSpec>,
    pub forward: Option<Vec<f64>>,
    pub rate: Option<f64>,
    pub maturity: Option<f64>,
    pub barrier: Option<BarrierSpec>,
    pub knock: Option<String>,
    pub joint: Option<JointSpec>,
    pub n_outer: Option<i64>,
    pub n_inner: Option<i64>,
    pub n_states: Option<i64>,
    pub vectors: Option<Vec<Vec<f64>>>,
    pub max: Option<bool>,
    pub boundary: Option<BoundarySpec>,
}

/// A validated spec with all defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub version: i64,
    pub seed: u64,
    pub samples: u64,
    pub tolerance: Tolerance,
    pub model: ModelSection,
    pub task: TaskSection,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub kind: Option<TaskKind>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    version: Option<i64>,
    seed: Option<i64>,
    samples: Option<i64>,
    tolerance: Option<Tolerance>,
    model: Option<ModelSection>,
    task: Option<TaskSection>,
}

const SCALAR_FAMILIES: &[&str] = &["lognormal", "self_dual_lognormal", "lp", "heavy_tail", "atoms", "unit"];
const VECTOR_FAMILIES: &[&str] = &["multilognormal", "jointly_self_dual", "common_factor", "unit_ball_max", "independent"];
const CONVENTIONS: &[&str] = &["mean", "truncated_triple", "truncated_euclidean"];
const PAYOFFS: &[&str] = &[
    "call",
    "put",
    "basket_call",
    "basket_put",
    "max",
    "binary_call",
    "binary_put",
    "gap_call",
    "gap_put",
    "spread",
    "power_call",
    "linear",
    "forward_min",
];
const CHECKS: &[&str] = &["auto", "density", "integrated_tail", "moments", "discrete", "payoff", "joint", "qsd", "triplet"];

struct Sem {
    errors: Vec<String>,
}

impl Sem {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn positive(&mut self, path: &str, v: Option<f64>) {
        if let Some(x) = v {
            if !(x > 0.0 && x.is_finite()) {
                self.err(path, format!("must be positive, got {x}"));
            }
        }
    }

    fn finite(&mut self, path: &str, v: Option<f64>) {
        if let Some(x) = v {
            if !x.is_finite() {
                self.err(path, format!("must be finite, got {x}"));
            }
        }
    }

    fn one_of(&mut self, path: &str, v: Option<&String>, allowed: &[&str]) {
        if let Some(s) = v {
            if !allowed.contains(&s.as_str()) {
                self.err(path, format!("unknown value \"{s}\" (expected one of {})", allowed.join(", ")));
            }
        }
    }

    fn at_least(&mut self, path: &str, v: Option<i64>, min: i64) {
        if let Some(x) = v {
            if x < min {
                self.err(path, format!("must be at least {min}, got {x}"));
            }
        }
    }

    fn required<T>(&mut self, path: &str, v: &Option<T>) {
        if v.is_none() {
            self.err(path, "required");
        }
    }

    fn square(&mut self, path: &str, m: Option<&Vec<Vec<f64>>>) {
        if let Some(m) = m {
            let n = m.len();
            if n == 0 || m.iter().any(|r| r.len() != n) {
                self.err(path, "must be a nonempty square matrix");
            }
        }
    }

    fn scalar(&mut self, path: &str, s: &ScalarSpec) {
        let fam = s.family.as_deref();
        self.required(&format!("{path}.family"), &s.family);
        self.one_of(&format!("{path}.family"), s.family.as_ref(), SCALAR_FAMILIES);
        self.positive(&format!("{path}.sigma"), s.sigma);
        self.finite(&format!("{path}.mu"), s.mu);
        if let Some(p) = s.p {
            if !(p > 1.0 && p.is_finite()) {
                self.err(&format!("{path}.p"), format!("must exceed 1, got {p}"));
            }
        }
        if let Some(g) = s.gamma {
            if !(g > -1.0 && g.is_finite()) {
                self.err(&format!("{path}.gamma"), format!("must exceed -1, got {g}"));
            }
        }
        match fam {
            Some("lognormal") => {
                self.required(&format!("{path}.sigma"), &s.sigma);
            }
            Some("self_dual_lognormal") => self.required(&format!("{path}.sigma"), &s.sigma),
            Some("lp") => self.required(&format!("{path}.p"), &s.p),
            Some("heavy_tail") => self.required(&format!("{path}.gamma"), &s.gamma),
            Some("atoms") => {
                self.required(&format!("{path}.atoms"), &s.atoms);
                if let Some(a) = &s.atoms {
                    for (k, row) in a.iter().enumerate() {
                        if row.len() != 2 || row[0].partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || row[1].partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                            self.err(&format!("{path}.atoms[{k}]"), "must be [value > 0, probability > 0]");
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

/// Parses and validates a spec document, reporting every violation.
pub fn parse_model_spec(text: &str, ov: &Overrides) -> Result<ModelSpec, CliError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Schema(vec![format!("document: {}", e.message())]))?;
    let mut errors = Vec::new();
    check_table("", &mut table, ROOT, &mut errors);
    let raw: RawSpec = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        errors.push(e.message().to_string());
        CliError::Schema(errors.clone())
    })?;
    let mut s = Sem { errors };

    if let Some(v) = raw.version {
        if v != SPEC_VERSION {
            s.err("version", format!("unsupported version {v} (expected {SPEC_VERSION})"));
        }
    }
    if let Some(seed) = raw.seed {
        if seed < 0 {
            s.err("seed", "must be nonnegative");
        }
    }
    s.at_least("samples", raw.samples, 2);
    let mut tolerance = raw.tolerance.unwrap_or_default();
    s.positive("tolerance.exact", tolerance.exact);
    s.positive("tolerance.se_band", tolerance.se_band);
    s.positive("tolerance.resolution", tolerance.resolution);

    let mut model = raw.model.unwrap_or_default();
    let mut task = raw.task.unwrap_or_default();
    let kind = match (ov.kind, task.kind) {
        (Some(a), Some(b)) if a != b => {
            s.err("task.kind", format!("\"{}\" does not match the subcommand \"{}\"", b.name(), a.name()));
            a
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            s.err("task.kind", "required when no subcommand is given");
            TaskKind::Check
        }
    };
    task.kind = Some(kind);

    if let Some(sc) = &model.scalar {
        s.scalar("model.scalar", sc);
    }
    if let Some(v) = &mut model.vector {
        s.required("model.vector.family", &v.family);
        s.one_of("model.vector.family", v.family.as_ref(), VECTOR_FAMILIES);
        s.positive("model.vector.sigma2", v.sigma2);
        s.at_least("model.vector.n", v.n, 1);
        s.square("model.vector.cov", v.cov.as_ref());
        match v.family.as_deref() {
            Some("multilognormal") => {
                s.required("model.vector.cov", &v.cov);
                if v.mu.is_none() {
                    if let Some(c) = &v.cov {
                        v.mu = Some((0..c.len()).map(|j| -0.5 * c[j].get(j).copied().unwrap_or(0.0)).collect());
                    }
                }
            }
            Some("jointly_self_dual") => {
                s.required("model.vector.sigma2", &v.sigma2);
                v.n.get_or_insert(2);
            }
            Some("unit_ball_max") => {
                v.n.get_or_insert(2);
            }
            Some("common_factor") | Some("independent") => {
                s.required("model.vector.factors", &v.factors);
                if let Some(fs) = &v.factors {
                    for (k, f) in fs.iter().enumerate() {
                        s.scalar(&format!("model.vector.factors[{k}]"), f);
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(t) = &mut model.triplet {
        s.required("model.triplet.a", &t.a);
        s.square("model.triplet.a", t.a.as_ref());
        s.one_of("model.triplet.convention", t.convention.as_ref(), CONVENTIONS);
        t.convention.get_or_insert_with(|| "mean".into());
        if t.convention.as_deref() == Some("truncated_triple") {
            t.ball_numeraire.get_or_insert(1);
        }
        t.normalize.get_or_insert(t.drift.is_none());
        for (k, g) in t.gaussians.iter().flatten().enumerate() {
            s.positive(&format!("model.triplet.gaussians[{k}].mass"), Some(g.mass));
        }
        for (k, g) in t.tilted.iter().flatten().enumerate() {
            s.positive(&format!("model.triplet.tilted[{k}].mass"), Some(g.mass));
        }
        for (k, a) in t.atoms.iter().flatten().enumerate() {
            s.positive(&format!("model.triplet.atoms[{k}].mass"), Some(a.mass));
        }
    }
    if let Some(p) = &mut model.paths {
        s.required("model.paths.s0", &p.s0);
        s.positive("model.paths.horizon", p.horizon);
        s.at_least("model.paths.steps", p.steps, 1);
        if let Some(x) = &p.s0 {
            for (k, v) in x.iter().enumerate() {
                s.positive(&format!("model.paths.s0[{k}]"), Some(*v));
            }
            p.lambda.get_or_insert_with(|| vec![0.0; x.len()]);
        }
        p.horizon.get_or_insert(1.0);
        p.steps.get_or_insert(250);
        p.bridge.get_or_insert(false);
    }

    // task
    s.at_least("task.numeraire", task.numeraire, 1);
    task.numeraire.get_or_insert(1);
    match kind {
        TaskKind::Check => {
            s.one_of("task.which", task.which.as_ref(), CHECKS);
            task.which.get_or_insert_with(|| "auto".into());
            if model.scalar.is_none() && model.vector.is_none() && model.triplet.is_none() {
                s.err("model", "check needs a scalar, vector or triplet model");
            }
            if task.which.as_deref() == Some("qsd") {
                s.required("task.lambda", &task.lambda);
                s.required("task.alpha", &task.alpha);
            }
        }
        TaskKind::Alpha => {
            if model.triplet.is_none() {
                s.err("model.triplet", "alpha needs a triplet model");
            }
            task.lambda.get_or_insert(OneOrMany::One(0.0));
        }
        TaskKind::Price => {
            if model.scalar.is_none() && model.vector.is_none() {
                s.err("model", "price needs a scalar or vector model");
            }
            s.required("task.payoff", &task.payoff);
            if let Some(p) = &task.payoff {
                s.required("task.payoff.kind", &p.kind);
                s.one_of("task.payoff.kind", p.kind.as_ref(), PAYOFFS);
                if let Some(k) = p.k {
                    if !(k >= 0.0 && k.is_finite()) {
                        s.err("task.payoff.k", format!("must be nonnegative, got {k}"));
                    }
                }
            }
            s.finite("task.rate", task.rate);
            s.positive("task.maturity", task.maturity);
            task.rate.get_or_insert(0.0);
            task.maturity.get_or_insert(1.0);
        }
        TaskKind::Hedge => {
            s.required("model.triplet", &model.triplet);
            s.required("model.paths", &model.paths);
            if task.joint.is_none() {
                s.required("task.barrier", &task.barrier);
                s.required("task.payoff", &task.payoff);
                if let Some(p) = &task.payoff {
                    s.one_of("task.payoff.kind", p.kind.as_ref(), PAYOFFS);
                }
                if let Some(b) = &task.barrier {
                    s.at_least("task.barrier.asset", Some(b.asset), 1);
                    s.positive("task.barrier.level", Some(b.level));
                }
                s.one_of("task.knock", task.knock.as_ref(), &["in", "out", "super"]);
                task.knock.get_or_insert_with(|| "in".into());
                match &task.alpha {
                    Some(AlphaSpec::Keyword(k)) if k != "solve" => s.err("task.alpha", format!("expected a number or \"solve\", got \"{k}\"")),
                    Some(AlphaSpec::Value(a)) => s.finite("task.alpha", Some(*a)),
                    _ => {}
                }
                task.alpha.get_or_insert(AlphaSpec::Keyword("solve".into()));
            } else if let Some(j) = &task.joint {
                s.one_of("task.joint.claim", Some(&j.claim), &["x", "y"]);
                s.positive("task.joint.k", Some(j.k));
            }
            s.at_least("task.n_outer", task.n_outer, 2);
            s.at_least("task.n_inner", task.n_inner, 2);
            s.at_least("task.n_states", task.n_states, 1);
            task.n_outer.get_or_insert(10_000);
            task.n_inner.get_or_insert(20_000);
            task.n_states.get_or_insert(50);
        }
        TaskKind::Zonoid => {
            if model.scalar.is_none() && model.vector.is_none() {
                s.err("model", "zonoid needs a scalar or vector model");
            }
            if task.vectors.is_none() && task.boundary.is_none() {
                s.err("task.vectors", "required unless task.boundary is given");
            }
            if let Some(b) = &task.boundary {
                if !(b.k_min > 0.0 && b.k_max > b.k_min) {
                    s.err("task.boundary", "needs 0 < k_min < k_max");
                }
                s.at_least("task.boundary.points", Some(b.points), 2);
            }
            task.max.get_or_insert(false);
        }
    }

    if !s.errors.is_empty() {
        return Err(CliError::Schema(s.errors));
    }
    tolerance.exact = ov.tol.or(tolerance.exact).or(Some(1e-10));
    tolerance.se_band.get_or_insert(3.0);
    tolerance.resolution.get_or_insert(1e-3);
    let seed = ov.seed.unwrap_or_else(|| raw.seed.map_or(DEFAULT_SEED, |v| v as u64));
    let samples = ov.samples.unwrap_or_else(|| raw.samples.map_or(DEFAULT_SAMPLES, |v| v as u64));
    Ok(ModelSpec {
        version: SPEC_VERSION,
        seed,
        samples,
        tolerance,
        model,
        task,
    })
}

impl ModelSpec {
    /// Canonical text form; parsing it again yields the same spec.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn kind(&self) -> TaskKind {
        self.task.kind.expect("kind is filled during validation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "version = 1\n[model.scalar]\nfamily = \"lognormal\"\nsigma = 0.2\n";

    fn errors(text: &str) -> Vec<String> {
        match parse_model_spec(text, &Overrides { kind: Some(TaskKind::Check), ..Default::default() }) {
            Err(CliError::Schema(e)) => e,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lambda_accepts_scalar_or_vector() {
        assert_eq!(OneOrMany::One(0.5).to_vec(), vec![0.5]);
        assert_eq!(OneOrMany::Many(vec![0.1, 0.2]).to_vec(), vec![0.1, 0.2]);
    }

    #[test]
    fn override_kind_wins() {
        let text = format!("{BASE}[task]\nkind = \"price\"\n[task.payoff]\nkind = \"call\"\nk = 1.0\n");
        let spec = parse_model_spec(&text, &Overrides { kind: Some(TaskKind::Price), ..Default::default() }).unwrap();
        assert_eq!(spec.kind(), TaskKind::Price);
        assert_eq!(spec.kind().name(), "price");
    }

    #[test]
    fn missing_kind_is_an_error() {
        match parse_model_spec(BASE, &Overrides::default()) {
            Err(CliError::Schema(e)) => assert!(e.iter().any(|m| m.starts_with("task.kind")), "{e:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_checks_name_the_field() {
        let e = errors("version = 1\n[model.scalar]\nfamily = \"atoms\"\natoms = [[0.5, 0.5], [-1.0, 0.5]]\n");
        assert!(e.iter().any(|m| m.starts_with("model.scalar.atoms[1]")), "{e:?}");
        let e = errors("version = 1\n[model.scalar]\nfamily = \"nope\"\n");
        assert!(e.iter().any(|m| m.starts_with("model.scalar.family")), "{e:?}");
    }

    #[test]
    fn invalid_toml_is_a_schema_error() {
        assert_eq!(errors("version = \n").len(), 1);
    }
}

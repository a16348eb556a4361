//! Structural validation of a spec document: every unknown key and every
//! value of the wrong type is reported with its path.

use toml::Value;

#[derive(Clone, Copy)]
pub(crate) enum Ty {
    Int,
    Num,
    Str,
    Bool,
    NumArr,
    NumMat,
    NumOrArr,
    NumOrStr,
    Table(&'static [(&'static str, Ty)]),
    TableArr(&'static [(&'static str, Ty)]),
}

const TOLERANCE: &[(&str, Ty)] = &[("exact", Ty::Num), ("se_band", Ty::Num), ("resolution", Ty::Num)];

const SCALAR: &[(&str, Ty)] = &[
    ("family", Ty::Str),
    ("mu", Ty::Num),
    ("sigma", Ty::Num),
    ("p", Ty::Num),
    ("gamma", Ty::Num),
    ("atoms", Ty::NumMat),
];

const VECTOR: &[(&str, Ty)] = &[
    ("family", Ty::Str),
    ("n", Ty::Int),
    ("sigma2", Ty::Num),
    ("mu", Ty::NumArr),
    ("cov", Ty::NumMat),
    ("factors", Ty::TableArr(SCALAR)),
];

const ATOM: &[(&str, Ty)] = &[("x", Ty::NumArr), ("mass", Ty::Num)];
const GAUSSIAN: &[(&str, Ty)] = &[("mass", Ty::Num), ("mean", Ty::NumArr), ("cov", Ty::NumMat)];
const TILTED: &[(&str, Ty)] = &[
    ("mass", Ty::Num),
    ("center", Ty::NumArr),
    ("cov", Ty::NumMat),
    ("alpha", Ty::Num),
    ("numeraire", Ty::Int),
];

const TRIPLET: &[(&str, Ty)] = &[
    ("a", Ty::NumMat),
    ("drift", Ty::NumArr),
    ("normalize", Ty::Bool),
    ("convention", Ty::Str),
    ("ball_numeraire", Ty::Int),
    ("atoms", Ty::TableArr(ATOM)),
    ("gaussians", Ty::TableArr(GAUSSIAN)),
    ("tilted", Ty::TableArr(TILTED)),
];

const PATHS: &[(&str, Ty)] = &[
    ("s0", Ty::NumArr),
    ("lambda", Ty::NumArr),
    ("horizon", Ty::Num),
    ("steps", Ty::Int),
    ("bridge", Ty::Bool),
];

const MODEL: &[(&str, Ty)] = &[
    ("scalar", Ty::Table(SCALAR)),
    ("vector", Ty::Table(VECTOR)),
    ("triplet", Ty::Table(TRIPLET)),
    ("paths", Ty::Table(PATHS)),
];

const PAYOFF: &[(&str, Ty)] = &[
    ("kind", Ty::Str),
    ("k", Ty::Num),
    ("u", Ty::NumArr),
    ("u0", Ty::Num),
    ("long", Ty::NumArr),
    ("short", Ty::NumArr),
    ("i", Ty::Int),
    ("j", Ty::Int),
    ("alpha", Ty::Num),
];

const BARRIER: &[(&str, Ty)] = &[("asset", Ty::Int), ("level", Ty::Num)];
const JOINT: &[(&str, Ty)] = &[("claim", Ty::Str), ("k", Ty::Num)];
const BOUNDARY: &[(&str, Ty)] = &[("k_min", Ty::Num), ("k_max", Ty::Num), ("points", Ty::Int)];

const TASK: &[(&str, Ty)] = &[
    ("kind", Ty::Str),
    ("which", Ty::Str),
    ("numeraire", Ty::Int),
    ("lambda", Ty::NumOrArr),
    ("alpha", Ty::NumOrStr),
    ("payoff", Ty::Table(PAYOFF)),
    ("forward", Ty::NumArr),
    ("rate", Ty::Num),
    ("maturity", Ty::Num),
    ("barrier", Ty::Table(BARRIER)),
    ("knock", Ty::Str),
    ("joint", Ty::Table(JOINT)),
    ("n_outer", Ty::Int),
    ("n_inner", Ty::Int),
    ("n_states", Ty::Int),
    ("vectors", Ty::NumMat),
    ("max", Ty::Bool),
    ("boundary", Ty::Table(BOUNDARY)),
];

pub(crate) const ROOT: &[(&str, Ty)] = &[
    ("version", Ty::Int),
    ("seed", Ty::Int),
    ("samples", Ty::Int),
    ("tolerance", Ty::Table(TOLERANCE)),
    ("model", Ty::Table(MODEL)),
    ("task", Ty::Table(TASK)),
];

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn is_num(v: &Value) -> bool {
    matches!(v, Value::Integer(_) | Value::Float(_))
}

/// Returns false when the value has the wrong type.
fn check_value(path: &str, v: &mut Value, ty: Ty, errors: &mut Vec<String>) -> bool {
    let before = errors.len();
    let mut bad = |what: &str| errors.push(format!("{path}: expected {what}"));
    match ty {
        Ty::Int => {
            if !matches!(v, Value::Integer(_)) {
                bad("an integer");
            }
        }
        Ty::Num => {
            if !is_num(v) {
                bad("a number");
            }
        }
        Ty::Str => {
            if !v.is_str() {
                bad("a string");
            }
        }
        Ty::Bool => {
            if !v.is_bool() {
                bad("a boolean");
            }
        }
        Ty::NumArr => match v.as_array() {
            Some(a) if a.iter().all(is_num) => {}
            _ => bad("an array of numbers"),
        },
        Ty::NumMat => match v.as_array() {
            Some(rows) if rows.iter().all(|r| r.as_array().is_some_and(|r| r.iter().all(is_num))) => {}
            _ => bad("an array of number arrays"),
        },
        Ty::NumOrArr => {
            if !(is_num(v) || v.as_array().is_some_and(|a| a.iter().all(is_num))) {
                bad("a number or an array of numbers");
            }
        }
        Ty::NumOrStr => {
            if !(is_num(v) || v.is_str()) {
                bad("a number or a string");
            }
        }
        Ty::Table(fields) => match v.as_table_mut() {
            Some(t) => {
                check_table(path, t, fields, errors);
                return true;
            }
            None => bad("a table"),
        },
        Ty::TableArr(fields) => match v.as_array_mut() {
            Some(items) => {
                let mut ok = true;
                for (k, item) in items.iter_mut().enumerate() {
                    let p = format!("{path}[{k}]");
                    match item.as_table_mut() {
                        Some(t) => check_table(&p, t, fields, errors),
                        None => {
                            errors.push(format!("{p}: expected a table"));
                            ok = false;
                        }
                    }
                }
                return ok;
            }
            None => bad("an array of tables"),
        },
    }
    errors.len() == before
}

/// Reports unknown keys and mistyped values, removing them so that the
/// remaining document can still be checked semantically.
pub(crate) fn check_table(path: &str, t: &mut toml::Table, fields: &[(&str, Ty)], errors: &mut Vec<String>) {
    let mut drop = Vec::new();
    for (key, v) in t.iter_mut() {
        let p = join(path, key);
        let keep = match fields.iter().find(|(name, _)| name == key) {
            Some((_, ty)) => check_value(&p, v, *ty, errors),
            None => {
                errors.push(format!("{p}: unknown key"));
                false
            }
        };
        if !keep {
            drop.push(key.clone());
        }
    }
    for k in drop {
        t.remove(&k);
    }
}

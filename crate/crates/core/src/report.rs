//! Residual reports shared by all symmetry checks.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Fail dominates inconclusive, which dominates pass.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Acceptance bands for residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bands {
    /// Half-width of the Monte-Carlo band in standard errors.
    pub se_band: f64,
    /// Absolute tolerance for exact or quadrature residuals.
    pub exact_tol: f64,
    /// A Monte-Carlo residual whose standard error exceeds
    /// `resolution_floor · scale` cannot certify a pass.
    pub resolution_floor: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            se_band: 3.0,
            exact_tol: 1e-10,
            resolution_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub label: String,
    pub point: Vec<f64>,
    pub residual: f64,
    pub std_error: f64,
    /// Allowed absolute deviation.
    pub band: f64,
    pub within: bool,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub test_name: String,
    pub records: Vec<ResidualRecord>,
    pub max_abs_residual: f64,
    pub max_residual_in_se_units: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl SymmetryReport {
    pub fn grid(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.point.clone()).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.std_error).collect()
    }

    /// Records whose label starts with `prefix`.
    pub fn filtered(&self, prefix: &str) -> Vec<&ResidualRecord> {
        self.records.iter().filter(|r| r.label.starts_with(prefix)).collect()
    }

    pub fn verdict_line(&self) -> String {
        format!(
            "{}: {} (max |residual| {:.3e}, max {:.2} SE, {} records)",
            self.test_name,
            self.verdict,
            self.max_abs_residual,
            self.max_residual_in_se_units,
            self.records.len()
        )
    }
}

/// Accumulates residual records and derives the verdict.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    name: String,
    bands: Bands,
    records: Vec<ResidualRecord>,
    notes: Vec<String>,
    forced: Option<Verdict>,
}

impl ReportBuilder {
    pub fn new(name: impl Into<String>, bands: Bands) -> Self {
        Self {
            name: name.into(),
            bands,
            records: Vec::new(),
            notes: Vec::new(),
            forced: None,
        }
    }

    pub fn bands(&self) -> &Bands {
        &self.bands
    }

    /// Exact residual with an explicit absolute tolerance.
    pub fn exact_tol(&mut self, label: impl Into<String>, point: Vec<f64>, residual: f64, tol: f64) -> &mut Self {
        self.records.push(ResidualRecord {
            label: label.into(),
            point,
            residual,
            std_error: 0.0,
            band: tol,
            within: residual.abs() <= tol,
            resolved: true,
        });
        self
    }

    /// Exact residual at the default tolerance.
    pub fn exact(&mut self, label: impl Into<String>, point: Vec<f64>, residual: f64) -> &mut Self {
        let tol = self.bands.exact_tol;
        self.exact_tol(label, point, residual, tol)
    }

    /// Monte-Carlo residual; `scale` is the magnitude of the compared
    /// quantities, used for the resolution floor.
    pub fn mc(&mut self, label: impl Into<String>, point: Vec<f64>, residual: f64, std_error: f64, scale: f64) -> &mut Self {
        let band = self.bands.se_band * std_error + 1e-12 * (1.0 + scale.abs());
        let resolved = std_error <= self.bands.resolution_floor * (1.0 + scale.abs());
        self.records.push(ResidualRecord {
            label: label.into(),
            point,
            residual,
            std_error,
            band,
            within: residual.is_finite() && residual.abs() <= band,
            resolved,
        });
        self
    }

    /// One-sided Monte-Carlo record: passes when `residual ≥ −band`.
    pub fn mc_lower(&mut self, label: impl Into<String>, point: Vec<f64>, residual: f64, std_error: f64, scale: f64) -> &mut Self {
        let band = self.bands.se_band * std_error + 1e-12 * (1.0 + scale.abs());
        let resolved = std_error <= self.bands.resolution_floor * (1.0 + scale.abs());
        self.records.push(ResidualRecord {
            label: label.into(),
            point,
            residual,
            std_error,
            band,
            within: residual.is_finite() && residual >= -band,
            resolved,
        });
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    /// Forces a failing verdict regardless of the records.
    pub fn fail(&mut self, reason: impl Into<String>) -> &mut Self {
        self.notes.push(reason.into());
        self.forced = Some(Verdict::Fail);
        self
    }

    /// Appends all records of `other`, prefixing their labels.
    pub fn absorb(&mut self, prefix: &str, other: SymmetryReport) -> &mut Self {
        let forced_fail = other.verdict == Verdict::Fail && other.records.iter().all(|r| r.within);
        for mut r in other.records {
            r.label = format!("{prefix}{}", r.label);
            self.records.push(r);
        }
        for n in other.notes {
            self.notes.push(format!("{prefix}{n}"));
        }
        if forced_fail {
            self.forced = Some(Verdict::Fail);
        }
        self
    }

    pub fn finish(self) -> SymmetryReport {
        let max_abs_residual = self.records.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        let max_se = self
            .records
            .iter()
            .filter(|r| r.std_error > 0.0)
            .map(|r| r.residual.abs() / r.std_error)
            .fold(0.0, f64::max);
        let mut verdict = if self.records.iter().any(|r| !r.within) {
            Verdict::Fail
        } else if self.records.iter().any(|r| !r.resolved) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        if let Some(f) = self.forced {
            verdict = verdict.and(f);
        }
        SymmetryReport {
            test_name: self.name,
            records: self.records,
            max_abs_residual,
            max_residual_in_se_units: max_se,
            verdict,
            notes: self.notes,
        }
    }
}

/// Decimal rendering with 17 significant digits.
pub fn fmt_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&e) {
        let decimals = (16 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

//! Report documents and CSV files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use selfdual::report::fmt_sig17;

use crate::run::Outcome;
use crate::spec::ModelSpec;

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub spec_sha256: String,
    pub seed: u64,
}

#[derive(Serialize)]
struct Document<'a> {
    header: &'a Header,
    spec: &'a ModelSpec,
    result: &'a Outcome,
}

pub fn header(spec: &ModelSpec) -> Header {
    let digest = Sha256::digest(spec.to_toml().as_bytes());
    let hex = digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Header {
        tool: "selfdual".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec_sha256: hex,
        seed: spec.seed,
    }
}

/// The report document: header, the spec with defaults, and the results.
pub fn render(spec: &ModelSpec, outcome: &Outcome) -> String {
    let h = header(spec);
    toml::to_string(&Document {
        header: &h,
        spec,
        result: outcome,
    })
    .expect("report serializes")
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_sig17(*x)).collect::<Vec<_>>().join(";")
}

/// One row per residual record of every report.
pub fn records_csv(outcome: &Outcome) -> String {
    let mut s = String::from("report,label,point,residual,std_error,band,within,resolved\n");
    let hedge_report = outcome.hedge.as_ref().map(|h| &h.report);
    for r in outcome.reports.iter().chain(hedge_report) {
        for rec in &r.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.test_name.replace(',', ";"),
                rec.label.replace(',', ";"),
                joined(&rec.point),
                fmt_sig17(rec.residual),
                fmt_sig17(rec.std_error),
                fmt_sig17(rec.band),
                rec.within,
                rec.resolved
            );
        }
    }
    s
}

/// Per-hit-state conditional values of a hedge evaluation.
pub fn gaps_csv(outcome: &Outcome) -> Option<String> {
    let h = outcome.hedge.as_ref()?;
    let mut s = String::from("label,path,step,time,state,overshoot,target,target_se,hedge,hedge_se,gap,gap_se,gap_in_se\n");
    for g in &h.gaps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.label,
            g.path,
            g.step,
            fmt_sig17(g.time),
            joined(&g.state),
            g.overshoot,
            fmt_sig17(g.target.value),
            fmt_sig17(g.target.std_error),
            fmt_sig17(g.hedge.value),
            fmt_sig17(g.hedge.std_error),
            fmt_sig17(g.gap.value),
            fmt_sig17(g.gap.std_error),
            fmt_sig17(g.gap_in_se)
        );
    }
    Some(s)
}

pub fn boundary_csv(outcome: &Outcome) -> Option<String> {
    if outcome.boundary.is_empty() {
        return None;
    }
    let mut buf = Vec::new();
    selfdual::geometry::write_boundary_csv(&outcome.boundary, &mut buf).ok()?;
    String::from_utf8(buf).ok()
}

/// Writes the report and any CSV tables into `dir`.
pub fn write_all(dir: &Path, report: &str, outcome: &Outcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.toml"), report)?;
    std::fs::write(dir.join("records.csv"), records_csv(outcome))?;
    if let Some(g) = gaps_csv(outcome) {
        std::fs::write(dir.join("gaps.csv"), g)?;
    }
    if let Some(b) = boundary_csv(outcome) {
        std::fs::write(dir.join("boundary.csv"), b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{parse_model_spec, Overrides, TaskKind};

    fn spec(seed: u64) -> ModelSpec {
        let text = "version = 1\n[model.scalar]\nfamily = \"self_dual_lognormal\"\nsigma = 0.3\n";
        parse_model_spec(text, &Overrides { kind: Some(TaskKind::Check), seed: Some(seed), ..Default::default() }).unwrap()
    }

    #[test]
    fn header_hash_is_hex_and_seed_dependent() {
        let a = header(&spec(1));
        assert_eq!(a.spec_sha256.len(), 64);
        assert!(a.spec_sha256.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(a.spec_sha256, header(&spec(1)).spec_sha256);
        assert_ne!(a.spec_sha256, header(&spec(2)).spec_sha256);
        assert_eq!(a.seed, 1);
    }

    #[test]
    fn empty_outcome_has_only_headers() {
        let o = Outcome::default();
        assert_eq!(records_csv(&o).lines().count(), 1);
        assert!(gaps_csv(&o).is_none());
        assert!(boundary_csv(&o).is_none());
    }

    #[test]
    fn rendered_report_parses() {
        let s = spec(3);
        let o = Outcome { task: "check".into(), ..Default::default() };
        let t: toml::Table = render(&s, &o).parse().unwrap();
        assert_eq!(t["header"]["tool"].as_str(), Some("selfdual"));
        assert_eq!(t["result"]["task"].as_str(), Some("check"));
        assert_eq!(t["spec"]["seed"].as_integer(), Some(3));
    }
}

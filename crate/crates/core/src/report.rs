//! Report files: rank and score tables, the spyder (radar) chart and a JSON summary.
//!
//! Everything here is a pure function of its inputs; numbers are printed in
//! shortest round-trip form so equal runs give equal bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::{Evaluation, PropertyReport, BASELINE};
use crate::error::{Error, Result};
use crate::explain::Method;
use crate::io::{write_atomic, write_json};
use crate::metrics::{MetricId, Property};

pub const RANKS_CSV: &str = "ranks.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const SPYDER_CSV: &str = "spyder.csv";
pub const SPYDER_SVG: &str = "spyder.svg";
pub const RANKS_TXT: &str = "ranks.txt";
pub const SUMMARY_JSON: &str = "summary.json";

/// One row per (property, method), baseline rows last with an empty rank.
pub fn ranks_csv(reports: &[PropertyReport], config_hash: &str, seed: u64) -> String {
    let mut out = format!("# config_hash={config_hash} seed={seed}\n");
    out.push_str("property,metric,method,mean,sem,rank,baseline_passed\n");
    for r in reports {
        for m in &r.methods {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.property, r.metric, m.method, m.mean, m.sem, m.rank, r.baseline_passed
            );
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},,{}",
            r.property, r.metric, BASELINE, r.baseline.mean, r.baseline.sem, r.baseline_passed
        );
    }
    out
}

/// Every per-sample score of the evaluation. For ROAD the `sample_id`
/// column holds the resampling draw.
pub fn scores_csv(evaluation: &Evaluation, config_hash: &str) -> String {
    let mut out = format!("# config_hash={config_hash} seed={}\n", evaluation.seed);
    out.push_str("metric,method,sample_id,raw,normalized\n");
    for s in &evaluation.scores {
        for ((id, raw), norm) in s.ids.iter().zip(&s.raw).zip(&s.normalized) {
            let _ = writeln!(out, "{},{},{id},{raw},{norm}", s.metric, s.method);
        }
    }
    out
}

/// Normalized mean per (method, property), the baseline included.
pub fn spyder_rows(reports: &[PropertyReport]) -> Vec<(Method, Property, MetricId, f64)> {
    let mut methods: Vec<Method> = reports.first().map(|r| r.methods.iter().map(|m| m.method).collect()).unwrap_or_default();
    methods.push(BASELINE);
    let mut rows = Vec::new();
    for &method in &methods {
        for r in reports {
            let mean = if method == BASELINE {
                r.baseline.mean
            } else {
                r.methods.iter().find(|m| m.method == method).map_or(f64::NAN, |m| m.mean)
            };
            rows.push((method, r.property, r.metric, mean));
        }
    }
    rows
}

pub fn spyder_csv(reports: &[PropertyReport]) -> String {
    let mut out = String::from("method,property,metric,score\n");
    for (method, property, metric, score) in spyder_rows(reports) {
        let _ = writeln!(out, "{method},{property},{metric},{score}");
    }
    out
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#2ca02c", "#d62728", "#17becf", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Radar chart with one closed polygon per method (the baseline dashed grey).
/// The radial axis runs from 0 at the centre to 1 at the rim; scores outside
/// `[0, 1]` are clamped.
pub fn spyder_svg(reports: &[PropertyReport]) -> Result<String> {
    let p = reports.len();
    if p < 3 {
        return Err(Error::Config(format!("a spyder plot needs at least 3 properties, got {p}")));
    }
    let (cx, cy, radius) = (260.0, 250.0, 180.0);
    let angle = |k: usize| -PI / 2.0 + 2.0 * PI * k as f64 / p as f64;
    let point = |k: usize, r: f64| {
        let a = angle(k);
        (cx + radius * r * a.cos(), cy + radius * r * a.sin())
    };
    let mut svg = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"500\" viewBox=\"0 0 720 500\">\n",
    );
    svg.push_str("  <rect width=\"720\" height=\"500\" fill=\"white\"/>\n  <g id=\"grid\" fill=\"none\" stroke=\"#cccccc\">\n");
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let pts: Vec<String> = (0..p).map(|k| point(k, ring)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(svg, "    <polygon points=\"{}\"/>", pts.join(" "));
    }
    for k in 0..p {
        let (x, y) = point(k, 1.0);
        let _ = writeln!(svg, "    <line x1=\"{cx:.2}\" y1=\"{cy:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\"/>");
    }
    svg.push_str("  </g>\n  <g id=\"axes\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">\n");
    for (k, r) in reports.iter().enumerate() {
        let (x, y) = point(k, 1.12);
        let _ = writeln!(
            svg,
            "    <text x=\"{x:.2}\" y=\"{:.2}\">{} ({})</text>",
            y + 4.0,
            escape(r.property.name()),
            escape(r.metric.id())
        );
    }
    svg.push_str("  </g>\n  <g id=\"polygons\" fill-opacity=\"0.08\" stroke-width=\"2\">\n");
    let rows = spyder_rows(reports);
    let methods: Vec<Method> = rows.iter().step_by(p).map(|r| r.0).collect();
    for (i, &method) in methods.iter().enumerate() {
        let pts: Vec<String> = rows[i * p..(i + 1) * p]
            .iter()
            .enumerate()
            .map(|(k, r)| point(k, if r.3.is_finite() { r.3.clamp(0.0, 1.0) } else { 0.0 }))
            .map(|(x, y)| format!("{x:.2},{y:.2}"))
            .collect();
        let (color, dash) = if method == BASELINE {
            ("#555555", " stroke-dasharray=\"6 4\"")
        } else {
            (PALETTE[i % PALETTE.len()], "")
        };
        let _ = writeln!(
            svg,
            "    <polygon data-method=\"{}\" points=\"{}\" stroke=\"{color}\" fill=\"{color}\"{dash}/>",
            escape(method.id()),
            pts.join(" ")
        );
    }
    svg.push_str("  </g>\n  <g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for (i, &method) in methods.iter().enumerate() {
        let y = 40.0 + 22.0 * i as f64;
        let color = if method == BASELINE { "#555555" } else { PALETTE[i % PALETTE.len()] };
        let _ = writeln!(
            svg,
            "    <rect x=\"540\" y=\"{:.2}\" width=\"14\" height=\"14\" fill=\"{color}\"/>\n    <text x=\"562\" y=\"{:.2}\">{}</text>",
            y - 11.0,
            y,
            escape(method.id())
        );
    }
    svg.push_str("  </g>\n</svg>\n");
    Ok(svg)
}

/// Methods down, properties across, one rank per cell.
pub fn ranks_table(reports: &[PropertyReport]) -> String {
    let methods: Vec<Method> = reports.first().map(|r| r.methods.iter().map(|m| m.method).collect()).unwrap_or_default();
    let width = methods.iter().map(|m| m.id().len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}", "method");
    for r in reports {
        let _ = write!(out, "  {:>14}", r.property.name());
    }
    out.push('\n');
    for &m in &methods {
        let _ = write!(out, "{:<width$}", m.id());
        for r in reports {
            let cell = r.rank_of(m).map_or("-".to_string(), |k| format!("{k}."));
            let _ = write!(out, "  {cell:>14}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<width$}", "baseline test");
    for r in reports {
        let _ = write!(out, "  {:>14}", if r.baseline_passed { "pass" } else { "fail" });
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub property: Property,
    pub metric: MetricId,
    pub baseline_passed: bool,
    pub ranks: Vec<(Method, usize)>,
}

/// Machine-readable digest of a run. Carries no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub arch: String,
    pub test_accuracy: f64,
    pub test_rmse: f64,
    pub sample_ids: Vec<usize>,
    pub methods: Vec<Method>,
    /// The random baseline takes part in the per-sample normalization.
    pub baseline_in_normalization: bool,
    pub properties: Vec<PropertySummary>,
}

impl Summary {
    pub fn properties_of(reports: &[PropertyReport]) -> Vec<PropertySummary> {
        reports
            .iter()
            .map(|r| PropertySummary {
                property: r.property,
                metric: r.metric,
                baseline_passed: r.baseline_passed,
                ranks: r.methods.iter().map(|m| (m.method, m.rank)).collect(),
            })
            .collect()
    }
}

/// Writes every report file into `dir`.
pub fn write_report(dir: &Path, evaluation: &Evaluation, reports: &[PropertyReport], summary: &Summary) -> Result<()> {
    let hash = &summary.config_hash;
    write_atomic(&dir.join(RANKS_CSV), ranks_csv(reports, hash, summary.seed).as_bytes())?;
    write_atomic(&dir.join(SCORES_CSV), scores_csv(evaluation, hash).as_bytes())?;
    write_atomic(&dir.join(SPYDER_CSV), spyder_csv(reports).as_bytes())?;
    write_atomic(&dir.join(SPYDER_SVG), spyder_svg(reports)?.as_bytes())?;
    write_atomic(&dir.join(RANKS_TXT), ranks_table(reports).as_bytes())?;
    write_json(&dir.join(SUMMARY_JSON), summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::MethodScore;
    use crate::metrics::Aggregate;

    fn report(property: Property, metric: MetricId, means: &[f64]) -> PropertyReport {
        let methods = [Method::Gradient, Method::InputGradient, Method::LrpZ];
        PropertyReport {
            property,
            metric,
            methods: methods
                .iter()
                .zip(means)
                .enumerate()
                .map(|(k, (&method, &mean))| MethodScore {
                    method,
                    mean,
                    sem: 0.01,
                    rank: k + 1,
                })
                .collect(),
            baseline: Aggregate {
                mean: -0.2,
                sem: 0.01,
                n: 50,
            },
            baseline_passed: true,
        }
    }

    fn reports() -> Vec<PropertyReport> {
        vec![
            report(Property::Robustness, MetricId::LocalLipschitz, &[1.0, 0.5, 0.25]),
            report(Property::Faithfulness, MetricId::FaithfulnessCorrelation, &[1.0, 0.6, 1.4]),
            report(Property::Complexity, MetricId::Sparseness, &[1.0, 0.7, 0.2]),
            report(Property::Localization, MetricId::Rra, &[1.0, 0.8, 0.1]),
        ]
    }

    /// Minimal well-formedness check: balanced tags, quoted attributes, one root.
    fn check_xml(doc: &str) {
        let body = doc.strip_prefix("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n").expect("xml declaration");
        let mut stack: Vec<String> = Vec::new();
        let mut roots = 0;
        let mut rest = body;
        while let Some(start) = rest.find('<') {
            assert!(!rest[..start].contains('>'), "stray '>'");
            let end = rest[start..].find('>').expect("unterminated tag") + start;
            let tag = &rest[start + 1..end];
            assert!(!tag.contains('<'));
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name.trim()), "mismatched </{name}>");
            } else {
                let name = tag.split_whitespace().next().unwrap().trim_end_matches('/').to_string();
                if stack.is_empty() {
                    roots += 1;
                }
                if !tag.ends_with('/') {
                    stack.push(name);
                }
            }
            rest = &rest[end + 1..];
        }
        assert!(stack.is_empty(), "unclosed {stack:?}");
        assert_eq!(roots, 1);
    }

    #[test]
    fn svg_is_well_formed_and_has_a_legend_entry_per_method() {
        let svg = spyder_svg(&reports()).unwrap();
        check_xml(&svg);
        for m in ["gradient", "input_gradient", "lrp_z", "random"] {
            assert!(svg.contains(&format!(">{m}</text>")), "legend misses {m}");
            assert!(svg.contains(&format!("data-method=\"{m}\"")));
        }
        assert!(spyder_svg(&reports()[..2]).is_err());
    }

    #[test]
    fn unit_scores_form_the_outer_rim() {
        let rs: Vec<PropertyReport> = reports()
            .into_iter()
            .map(|mut r| {
                r.methods[0].mean = 1.0;
                r
            })
            .collect();
        let svg = spyder_svg(&rs).unwrap();
        let rim = svg.lines().find(|l| l.contains("<polygon points")).unwrap().to_string();
        let gradient = svg.lines().find(|l| l.contains("data-method=\"gradient\"")).unwrap();
        let rim_pts = rim.split('"').nth(1).unwrap();
        // the last grid ring is the rim
        let last_ring = svg.lines().filter(|l| l.trim_start().starts_with("<polygon points")).last().unwrap();
        assert_ne!(rim, last_ring);
        assert!(gradient.contains(last_ring.split('"').nth(1).unwrap()));
        assert!(!gradient.contains(rim_pts));
    }

    #[test]
    fn scores_are_clamped_into_the_unit_disc() {
        let svg = spyder_svg(&reports()).unwrap();
        let baseline = svg.lines().find(|l| l.contains("data-method=\"random\"")).unwrap();
        // every baseline score is negative, so the polygon collapses onto the centre
        let pts = baseline.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert!(pts.split(' ').all(|p| p == "260.00,250.00"), "{pts}");
        // lrp_z's faithfulness of 1.4 sits on the rim
        let (x, y) = (260.0 + 180.0 * (-PI / 2.0 + PI / 2.0).cos(), 250.0 + 180.0 * (-PI / 2.0 + PI / 2.0).sin());
        let lrp = svg.lines().find(|l| l.contains("data-method=\"lrp_z\"")).unwrap();
        assert!(lrp.contains(&format!("{x:.2},{y:.2}")));
    }

    #[test]
    fn csv_shapes() {
        let rs = reports();
        let spyder = spyder_csv(&rs);
        assert_eq!(spyder.lines().count() - 1, 4 * rs.len());
        let ranks = ranks_csv(&rs, "abc", 7);
        assert!(ranks.starts_with("# config_hash=abc seed=7\n"));
        assert_eq!(ranks.lines().count(), 2 + 4 * rs.len());
        assert!(ranks.contains("robustness,local_lipschitz,input_gradient,0.5,0.01,2,true"));
        let table = ranks_table(&rs);
        assert_eq!(table.lines().count(), 5);
        assert!(table.lines().nth(3).unwrap().starts_with("lrp_z"));
    }
}

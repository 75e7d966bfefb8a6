//! Report artifacts for a hypothesis study: the per-GOP CSV, significance
//! map, a JSON summary with full option provenance, and a sorted p-value SVG
//! plot (raw, BH, Bonferroni curves with the significance line).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::Result;
use crate::hypothesis::{Euclideanization, StudyMode, TestReport};

/// Per-GOP results as CSV.
pub fn report_csv(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str("gop_kind,index,statistic,raw_p,bh_p,bonf_p,sig_raw,sig_bh,sig_bonf\n");
    for g in &report.gops {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            g.id.kind.as_str(),
            g.id.index,
            g.statistic,
            g.raw_p,
            g.bh_p,
            g.bonf_p,
            g.sig_raw as u8,
            g.sig_bh as u8,
            g.sig_bonf as u8
        )
        .expect("string write");
    }
    out
}

pub fn write_report_csv(report: &TestReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), report_csv(report))?;
    Ok(())
}

/// GOP ids with their BH significance flag, the data behind significance
/// maps over the skeletal structure.
pub fn significance_map_csv(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str("gop_kind,index,sig_bh\n");
    for g in &report.gops {
        writeln!(out, "{},{},{}", g.id.kind.as_str(), g.id.index, g.sig_bh as u8)
            .expect("string write");
    }
    out
}

pub fn write_significance_map_csv(report: &TestReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), significance_map_csv(report))?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryCounts {
    raw: usize,
    bh: usize,
    bonferroni: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    mode: &'a str,
    k: usize,
    n1: usize,
    n2: usize,
    permutations: usize,
    seed: u64,
    alpha: f64,
    fdr: f64,
    euclideanization: &'a str,
    gpa_scaling: bool,
    significant: SummaryCounts,
    degenerate_gops: Vec<String>,
    ridge_gops: Vec<String>,
}

/// JSON summary with significance counts and the full option set for
/// provenance.
pub fn summary_json(report: &TestReport) -> Result<String> {
    let tag = |kind: &crate::hypothesis::GopId| format!("{}:{}", kind.kind.as_str(), kind.index);
    let summary = Summary {
        mode: match report.mode {
            StudyMode::Lp => "lp",
            StudyMode::Gp => "gp",
        },
        k: report.k,
        n1: report.n1,
        n2: report.n2,
        permutations: report.options.b,
        seed: report.options.seed,
        alpha: report.options.alpha,
        fdr: report.options.fdr,
        euclideanization: match report.options.euclid {
            Euclideanization::Pns => "pns",
            Euclideanization::Tangent => "tangent",
        },
        gpa_scaling: report.options.gpa_scaling,
        significant: SummaryCounts {
            raw: report.significant_raw(),
            bh: report.significant_bh(),
            bonferroni: report.significant_bonf(),
        },
        degenerate_gops: report
            .gops
            .iter()
            .filter(|g| g.degenerate)
            .map(|g| tag(&g.id))
            .collect(),
        ridge_gops: report
            .gops
            .iter()
            .filter(|g| g.ridge_used)
            .map(|g| tag(&g.id))
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&summary)? + "\n")
}

pub fn write_summary_json(report: &TestReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), summary_json(report)?)?;
    Ok(())
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_B: f64 = 44.0;
const MARGIN_T: f64 = 18.0;
const MARGIN_R: f64 = 16.0;

fn polyline(values: &[f64], k: usize, color: &str) -> String {
    let span_x = PLOT_W - MARGIN_L - MARGIN_R;
    let span_y = PLOT_H - MARGIN_T - MARGIN_B;
    let pts: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let x = MARGIN_L + span_x * (i as f64 + 0.5) / k as f64;
            let y = MARGIN_T + span_y * (1.0 - p.clamp(0.0, 1.0));
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Sorted p-value plot: raw, BH-adjusted and Bonferroni-adjusted curves with
/// a dashed line at the significance level.
pub fn pvalue_svg(report: &TestReport) -> String {
    let k = report.k.max(1);
    let sorted = |f: &dyn Fn(&crate::hypothesis::GopResult) -> f64| -> Vec<f64> {
        let mut v: Vec<f64> = report.gops.iter().map(f).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let raw = sorted(&|g| g.raw_p);
    let bh = sorted(&|g| g.bh_p);
    let bonf = sorted(&|g| g.bonf_p);

    let span_x = PLOT_W - MARGIN_L - MARGIN_R;
    let span_y = PLOT_H - MARGIN_T - MARGIN_B;
    let alpha_y = MARGIN_T + span_y * (1.0 - report.options.alpha);

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    write!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        PLOT_H - MARGIN_B
    )
    .unwrap();
    write!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        PLOT_H - MARGIN_B,
        PLOT_W - MARGIN_R,
        PLOT_H - MARGIN_B
    )
    .unwrap();
    // y ticks at 0, 0.5, 1
    for t in [0.0, 0.5, 1.0] {
        let y = MARGIN_T + span_y * (1.0 - t);
        write!(
            svg,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{MARGIN_L}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 4.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{t}</text>\n",
            MARGIN_L - 7.0,
            y + 4.0
        )
        .unwrap();
    }
    // x label ticks at 1 and K
    for (frac, label) in [(0.5 / k as f64, "1".to_string()), (1.0 - 0.5 / k as f64, k.to_string())] {
        let x = MARGIN_L + span_x * frac;
        write!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>\n",
            PLOT_H - MARGIN_B + 16.0
        )
        .unwrap();
    }
    write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">sorted GOP rank</text>\n",
        MARGIN_L + span_x / 2.0,
        PLOT_H - 8.0
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"14\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">p-value</text>\n",
        MARGIN_T + span_y / 2.0,
        MARGIN_T + span_y / 2.0
    )
    .unwrap();

    write!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{alpha_y:.2}\" x2=\"{}\" y2=\"{alpha_y:.2}\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n",
        PLOT_W - MARGIN_R
    )
    .unwrap();

    svg.push_str(&polyline(&raw, k, "#1f77b4"));
    svg.push_str(&polyline(&bh, k, "#d62728"));
    svg.push_str(&polyline(&bonf, k, "#2ca02c"));

    for (i, (label, color)) in [
        ("raw", "#1f77b4"),
        ("BH", "#d62728"),
        ("Bonferroni", "#2ca02c"),
    ]
    .iter()
    .enumerate()
    {
        let y = MARGIN_T + 16.0 * (i as f64 + 1.0);
        write!(
            svg,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"11\">{label}</text>\n",
            MARGIN_L + 40.0,
            y + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_pvalue_svg(report: &TestReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), pvalue_svg(report))?;
    Ok(())
}

/// Spoke tips of a GP rep as an xyz point-cloud CSV.
pub fn tips_csv(tips: &[Vector3<f64>]) -> String {
    let mut out = String::from("x,y,z\n");
    for t in tips {
        writeln!(out, "{},{},{}", t.x, t.y, t.z).expect("string write");
    }
    out
}

pub fn write_tips_csv(tips: &[Vector3<f64>], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), tips_csv(tips))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{GopId, GopKind, GopResult, StudyOptions};

    fn toy_report() -> TestReport {
        let gops = vec![
            GopResult {
                id: GopId {
                    kind: GopKind::SpokeDir,
                    index: 0,
                },
                statistic: 4.2,
                raw_p: 0.001,
                bh_p: 0.002,
                bonf_p: 0.002,
                sig_raw: true,
                sig_bh: true,
                sig_bonf: true,
                degenerate: false,
                ridge_used: false,
            },
            GopResult {
                id: GopId {
                    kind: GopKind::Size,
                    index: 0,
                },
                statistic: -0.3,
                raw_p: 0.8,
                bh_p: 0.8,
                bonf_p: 1.0,
                sig_raw: false,
                sig_bh: false,
                sig_bonf: false,
                degenerate: false,
                ridge_used: true,
            },
        ];
        TestReport {
            mode: StudyMode::Lp,
            options: StudyOptions::default(),
            n1: 10,
            n2: 12,
            k: 2,
            gops,
        }
    }

    #[test]
    fn csv_layout() {
        let csv = report_csv(&toy_report());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "gop_kind,index,statistic,raw_p,bh_p,bonf_p,sig_raw,sig_bh,sig_bonf"
        );
        assert!(lines.next().unwrap().starts_with("spoke_dir,0,4.2,0.001,"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn summary_mentions_ridge_gop() {
        let json = summary_json(&toy_report()).unwrap();
        assert!(json.contains("\"size:0\""));
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["significant"]["raw"], 1);
    }

    #[test]
    fn svg_contains_curves_and_alpha_line() {
        let svg = pvalue_svg(&toy_report());
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
    }
}

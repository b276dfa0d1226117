//! CSV and SVG serialisation of experiment reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::backtest::{ExperimentKind, ExperimentReport};
use crate::risk_metrics::{MetricKind, PerformanceSummary};

pub const REPORT_HEADER: &str = "portfolio,window,window_start,window_end,metric,statistic,value,status";
pub const WEIGHTS_HEADER: &str = "portfolio,window,objective,target,ticker,weight";

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Full-precision long-form report.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            quote(&r.portfolio),
            opt(r.window),
            opt(r.window_start),
            opt(r.window_end),
            r.metric,
            r.statistic,
            opt(r.value),
            quote(&r.status)
        );
    }
    out
}

pub fn weights_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(WEIGHTS_HEADER);
    out.push('\n');
    for w in &report.weights {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            quote(&w.portfolio),
            w.window,
            w.objective,
            w.target,
            quote(&w.ticker),
            w.weight
        );
    }
    out
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => {
            let s = format!("{v:.4}");
            if s == "-0.0000" {
                "0.0000".into()
            } else {
                s
            }
        }
        None => "NA".into(),
    }
}

fn portfolios(report: &ExperimentReport) -> Vec<&str> {
    let mut names: Vec<&str> = report.rows.iter().map(|r| r.portfolio.as_str()).collect();
    names.dedup();
    names
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Table-shaped summary rounded to four decimals.
///
/// * relationship: one `tn` row (conditional dependence) and one
///   `mean_pearson` row (mean correlation across windows) per portfolio,
///   with a column per traditional metric;
/// * robustness: mean CV per portfolio and metric;
/// * optimize: one row per portfolio and performance statistic, with a
///   column per objective.
pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    match report.metadata.kind {
        ExperimentKind::Relationship => {
            out.push_str("portfolio,table,VOLATILITY,DR_SD,DR_VAR\n");
            for p in portfolios(report) {
                let tn: Vec<String> = MetricKind::TRADITIONAL
                    .iter()
                    .map(|k| cell(report.value(p, None, k.as_str(), "tn")))
                    .collect();
                let _ = writeln!(out, "{},tn,{}", quote(p), tn.join(","));
                let corr: Vec<String> = MetricKind::TRADITIONAL
                    .iter()
                    .map(|k| {
                        cell(mean(
                            report
                                .rows
                                .iter()
                                .filter(|r| r.portfolio == p && r.metric == k.as_str() && r.statistic == "pearson")
                                .filter_map(|r| r.value),
                        ))
                    })
                    .collect();
                let _ = writeln!(out, "{},mean_pearson,{}", quote(p), corr.join(","));
            }
        }
        ExperimentKind::Robustness => {
            out.push_str("portfolio,LR,VOLATILITY,DR_SD,DR_VAR\n");
            for p in portfolios(report) {
                let cv: Vec<String> = MetricKind::ALL
                    .iter()
                    .map(|k| cell(report.value(p, None, k.as_str(), "mean_cv")))
                    .collect();
                let _ = writeln!(out, "{},{}", quote(p), cv.join(","));
            }
        }
        ExperimentKind::Optimize => {
            out.push_str("portfolio,statistic,LR,VOLATILITY,DR_SD,DR_VAR\n");
            for p in portfolios(report) {
                for stat in PerformanceSummary::STATISTICS {
                    let cols: Vec<String> = MetricKind::ALL
                        .iter()
                        .map(|k| cell(report.value(p, None, k.as_str(), stat)))
                        .collect();
                    let _ = writeln!(out, "{},{stat},{}", quote(p), cols.join(","));
                }
            }
        }
    }
    out
}

const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

/// Line plot of one statistic across windows, one line per objective.
pub fn statistic_svg(report: &ExperimentReport, portfolio: &str, statistic: &str) -> String {
    let mut series: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut max_window = 0;
    for r in &report.rows {
        if r.portfolio != portfolio || r.statistic != statistic {
            continue;
        }
        let (Some(w), Some(v)) = (r.window, r.value) else {
            continue;
        };
        if let Some(k) = MetricKind::ALL.iter().position(|k| k.as_str() == r.metric) {
            series.entry(k).or_default().push((w, v));
            max_window = max_window.max(w);
        }
    }
    let values: Vec<f64> = series.values().flatten().map(|(_, v)| *v).collect();
    let (mut lo, mut hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }

    let (w, h, left, right, top, bottom) = (640.0, 360.0, 70.0, 130.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x_of = |i: usize| {
        left + if max_window == 0 {
            pw / 2.0
        } else {
            pw * i as f64 / max_window as f64
        }
    };
    let y_of = |v: f64| top + ph * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="14" text-anchor="middle">{} · {}</text>"#,
        left + pw / 2.0,
        escape(portfolio),
        statistic
    );
    let _ = writeln!(
        svg,
        r##"<path d="M{left} {top} V{} H{}" fill="none" stroke="#444"/>"##,
        top + ph,
        left + pw
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.3}</text><line x1="{left}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
            left - 6.0,
            y + 3.0,
            left + pw
        );
    }
    for i in 0..=max_window {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{i}</text>"#,
            x_of(i),
            top + ph + 14.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">window</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    for (k, points) in &series {
        let color = COLORS[*k];
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(j, (i, v))| format!("{}{:.1} {:.1}", if j == 0 { "M" } else { "L" }, x_of(*i), y_of(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for (i, v) in points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(*i),
                y_of(*v)
            );
        }
        let ly = top + 16.0 * *k as f64 + 8.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0,
            MetricKind::ALL[*k].as_str()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

//! CSV and SVG emission of evaluation results.
//!
//! Sweep CSV columns: `m,variant,metric,value,seed,dataset_id`.
//! Report CSV columns: `class,precision,recall,f1,support`, one row per
//! class followed by a `weighted` row. Ratios with a zero denominator are
//! written as 0.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::eval::metrics::ClassificationReport;
use crate::eval::sweep::{SweepResult, SweepRow};

pub const SWEEP_HEADER: &str = "m,variant,metric,value,seed,dataset_id";
pub const REPORT_HEADER: &str = "class,precision,recall,f1,support";

fn check_field(s: &str) -> Result<()> {
    if s.contains([',', '\n', '"']) {
        return Err(Error::data(format!("field {s:?} cannot be written unquoted")));
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in &result.rows {
        check_field(&r.variant)?;
        check_field(&r.metric)?;
        check_field(&r.dataset_id)?;
        writeln!(w, "{},{},{},{},{},{}", r.m, r.variant, r.metric, r.value, r.seed, r.dataset_id)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: BufRead>(r: R) -> Result<SweepResult> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == SWEEP_HEADER => {}
        _ => return Err(Error::data(format!("sweep CSV must start with {SWEEP_HEADER:?}"))),
    }
    let mut out = SweepResult::default();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::data(format!("sweep CSV line {}: {line:?}", n + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        let row = SweepRow {
            m: f[0].parse().map_err(|_| bad())?,
            variant: f[1].to_string(),
            metric: f[2].to_string(),
            value: f[3].parse().map_err(|_| bad())?,
            seed: f[4].parse().map_err(|_| bad())?,
            dataset_id: f[5].to_string(),
        };
        if out.rows.is_empty() {
            out.seed = row.seed;
            out.dataset_id = row.dataset_id.clone();
        }
        out.rows.push(row);
    }
    Ok(out)
}

pub fn write_report_csv<W: Write>(report: &ClassificationReport, class_names: &[&str], mut w: W) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for (i, c) in report.classes.iter().enumerate() {
        let name = class_names.get(i).map_or_else(|| i.to_string(), |s| s.to_string());
        check_field(&name)?;
        writeln!(w, "{name},{},{},{},{}", c.precision, c.recall, c.f1, c.support)?;
    }
    writeln!(
        w,
        "weighted,{},{},{},{}",
        report.weighted_precision,
        report.weighted_recall,
        report.weighted_f1,
        report.samples()
    )?;
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line chart of `metric` against the occlusion level, one polyline per
/// variant.
pub fn sweep_svg(result: &SweepResult, metric: &str) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 70.0, 160.0, 30.0, 50.0);
    let variants = result.variants();
    let pts: Vec<(usize, f64)> = variants
        .iter()
        .flat_map(|v| result.series(v, metric))
        .filter(|(_, y)| y.is_finite())
        .collect();
    let m_max = pts.iter().map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let y_lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).min(0.0);
    let mut y_hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(y_hi > y_lo) {
        y_hi = y_lo + 1.0;
    }
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |m: f64| left + m / m_max * pw;
    let sy = |v: f64| top + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle">{metric} vs occluded joints</text>"#, left + pw / 2.0);
    let _ = writeln!(
        s,
        r##"<path d="M{left},{top} V{} H{}" fill="none" stroke="#333"/>"##,
        top + ph,
        left + pw
    );
    for m in 0..=m_max as usize {
        let x = sx(m as f64);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{m}</text>"#, top + ph + 16.0);
    }
    for i in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.3}</text>"#, left - 6.0, sy(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">m</text>"#, left + pw / 2.0, h - 10.0);
    for (i, v) in variants.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = result
            .series(v, metric)
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(m, y)| format!("{:.1},{:.1}", sx(m as f64), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = top + 20.0 * i as f64 + 10.0;
        let lx = left + pw + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, xml_escape(v));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::weighted_prf;
    use crate::eval::sweep::METRIC_MPJPE;

    fn result() -> SweepResult {
        let mut rows = Vec::new();
        for m in [0, 1, 3] {
            for (v, base) in [("with_ojr", 20.0), ("without_ojr", 150.0)] {
                rows.push(SweepRow {
                    m,
                    variant: v.into(),
                    metric: METRIC_MPJPE.into(),
                    value: base + m as f64 * 0.1 + 1.0 / 3.0,
                    seed: 11,
                    dataset_id: "abc123".into(),
                });
            }
        }
        SweepResult {
            seed: 11,
            dataset_id: "abc123".into(),
            rows,
        }
    }

    #[test]
    fn sweep_csv_roundtrip() {
        let r = result();
        let mut buf = Vec::new();
        write_sweep_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 1 + 3 * 2);
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_sweep_csv("a,b\n".as_bytes()).is_err());
        let bad = format!("{SWEEP_HEADER}\n1,x,y,notanumber,1,d\n");
        assert!(read_sweep_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn chart_has_one_series_per_variant() {
        let svg = sweep_svg(&result(), METRIC_MPJPE);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn report_csv_layout() {
        let r = weighted_prf(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&r, &["no_fall", "fall"], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert!(lines[1].starts_with("no_fall,1,0.5,"));
        assert!(lines[3].starts_with("weighted,"));
        assert!(lines[3].ends_with(",3"));
    }
}

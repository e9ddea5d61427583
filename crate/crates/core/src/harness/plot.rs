//! SVG panels of selection frequency against sample size.
//!
//! One panel per `(case, schedule)`: log-scaled n on the x axis, the
//! frequency of choosing the best procedure on the y axis, one polyline per
//! scheme. A tab-separated sidecar holds the plotted points.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::FrequencyTable;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Scheme id to `(n, frequency)` points.
type Series = BTreeMap<String, Vec<(usize, f64)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub case: String,
    pub schedule: String,
    /// Scheme id to `(n, frequency)` points, sorted by n.
    pub series: Series,
}

/// Groups the cells that ran into panels.
pub fn panels(table: &FrequencyTable) -> Result<Vec<Panel>> {
    let mut map: BTreeMap<(String, String), Series> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.is_ok()) {
        let f = r.best_freq();
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidInput(format!(
                "frequency {f} for {} n={} {} {} is outside [0, 1]",
                r.case, r.n, r.schedule, r.scheme
            )));
        }
        map.entry((r.case.clone(), r.schedule.clone()))
            .or_default()
            .entry(r.scheme.clone())
            .or_default()
            .push((r.n, f));
    }
    if map.is_empty() {
        return Err(Error::EmptySelection("the table has no completed cells to plot".into()));
    }
    Ok(map
        .into_iter()
        .map(|((case, schedule), mut series)| {
            for pts in series.values_mut() {
                pts.sort_by_key(|p| p.0);
            }
            Panel { case, schedule, series }
        })
        .collect())
}

fn marker(scheme: &str, x: f64, y: f64, out: &mut String) {
    let d = 4.0;
    let s = if scheme.starts_with("rlt") {
        format!(r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#, x - d, y - d, 2.0 * d, 2.0 * d)
    } else if scheme.starts_with("rsv") {
        format!(r#"<path d="M{:.2} {:.2}H{:.2}M{:.2} {:.2}V{:.2}" fill="none"/>"#, x - d, y, x + d, x, y - d, y + d)
    } else if scheme == "single" {
        format!(
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" fill="none"/>"#,
            x - d,
            y - d,
            x + d,
            y + d,
            x - d,
            y + d,
            x + d,
            y - d
        )
    } else {
        format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="{d}" fill="none"/>"#)
    };
    out.push_str(&s);
    out.push('\n');
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(panel: &Panel) -> String {
    let ns: Vec<usize> = panel.series.values().flatten().map(|p| p.0).collect();
    let lo = (*ns.iter().min().unwrap() as f64).ln();
    let hi = (*ns.iter().max().unwrap() as f64).ln();
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |n: usize| LEFT + ((n as f64).ln() - lo) / (hi - lo) * pw;
    let py = |f: f64| TOP + (1.0 - f) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}, {}</text>"#,
        LEFT + pw / 2.0,
        escape(&panel.case),
        escape(&panel.schedule)
    )
    .unwrap();
    writeln!(s, r#"<g stroke="black" fill="none">"#).unwrap();
    writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#).unwrap();
    s.push_str("</g>\n");
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let y = py(f);
        writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="black"/>"#, LEFT - 4.0, LEFT).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{f:.2}</text>"#, LEFT - 7.0, y + 4.0).unwrap();
    }
    let mut ticks = ns.clone();
    ticks.sort_unstable();
    ticks.dedup();
    for n in ticks {
        let x = px(n);
        let y = TOP + ph;
        writeln!(s, r#"<line x1="{x:.2}" y1="{y}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{n}</text>"#, y + 16.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">n (log scale)</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0)
        .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">frequency of best</text>"#,
        TOP + ph / 2.0
    )
    .unwrap();

    for (i, (scheme, pts)) in panel.series.iter().enumerate() {
        writeln!(s, r#"<g stroke="black" fill="black" data-scheme="{}">"#, escape(scheme)).unwrap();
        let path: Vec<String> = pts.iter().map(|&(n, f)| format!("{:.2},{:.2}", px(n), py(f))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none"/>"#, path.join(" ")).unwrap();
        for &(n, f) in pts {
            marker(scheme, px(n), py(f), &mut s);
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        marker(scheme, lx, ly - 4.0, &mut s);
        writeln!(s, r#"<text x="{}" y="{ly:.1}" stroke="none">{}</text>"#, lx + 10.0, escape(scheme)).unwrap();
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn file_stem(panel: &Panel) -> String {
    format!("{}_{}", panel.case, panel.schedule)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect()
}

/// Writes one `.svg` and one `.tsv` per panel; returns the SVG paths.
pub fn emit_plot(table: &FrequencyTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let panels = panels(table)?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(panels.len());
    for p in &panels {
        let stem = file_stem(p);
        let svg = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&svg, render_svg(p))?;
        let mut tsv = String::from("scheme\tn\tfreq\n");
        for (scheme, pts) in &p.series {
            for (n, f) in pts {
                writeln!(tsv, "{scheme}\t{n}\t{f}").unwrap();
            }
        }
        std::fs::write(out_dir.join(format!("{stem}.tsv")), tsv)?;
        written.push(svg);
    }
    Ok(written)
}

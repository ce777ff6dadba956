//! Static SVG plots. Every chart is 800×480 and all numbers are printed with
//! fixed precision, so identical artifacts give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use workwell_core::domain::GroupLabel;
use workwell_core::scheduler::{QTable, WorkAction, WORKPLACE_STATES};
use workwell_core::simengine::{RunReport, StoredArtifacts};
use workwell_core::wellness::ContentId;

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 480;

const PALETTE: [&str; 6] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2,
        escape(title)
    );
    s
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

/// White to dark blue.
fn heat(t: f64) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(247.0, 8.0),
        lerp(251.0, 48.0),
        lerp(255.0, 107.0)
    )
}

fn state_label(s: usize) -> String {
    let load = ["low", "med", "high"][s / 3];
    let backlog = ["0", "1", "2+"][s % 3];
    format!("{load}/{backlog}")
}

/// One heatmap panel per arm on a shared colour scale.
pub fn qvalues_svg(tables: &[(String, QTable)]) -> String {
    let mut s = open("Q-values by state and action");
    let (lo, hi) = tables
        .iter()
        .flat_map(|(_, q)| q.values().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let panels = tables.len().max(1) as f64;
    let left = 70.0;
    let panel_w = (f64::from(WIDTH) - left - 20.0) / panels;
    let top = 60.0;
    let grid_h = f64::from(HEIGHT) - top - 90.0;
    let labels = WorkAction::labels();
    for (p, (arm, q)) in tables.iter().enumerate() {
        let x0 = left + p as f64 * panel_w;
        let cw = (panel_w - 10.0) / q.action_count().max(1) as f64;
        let ch = grid_h / q.state_count().max(1) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
            x0 + (panel_w - 10.0) / 2.0,
            top - 12.0,
            escape(arm)
        );
        for st in 0..q.state_count() {
            for a in 0..q.action_count() {
                let v = q.get(st, a);
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}" stroke="#ffffff"><title>{} {} {:.4}</title></rect>"##,
                    x0 + a as f64 * cw,
                    top + st as f64 * ch,
                    cw,
                    ch,
                    heat((v - lo) / span),
                    state_label(st.min(WORKPLACE_STATES - 1)),
                    labels.get(a).copied().unwrap_or("?"),
                    v
                );
            }
        }
        for (a, label) in labels.iter().enumerate().take(q.action_count()) {
            let x = x0 + (a as f64 + 0.5) * cw;
            let y = top + grid_h + 8.0;
            let _ = writeln!(
                s,
                r#"<text x="{x:.1}" y="{y:.1}" transform="rotate(45 {x:.1} {y:.1})" font-size="9">{}</text>"#,
                escape(label)
            );
        }
        if p == 0 {
            for st in 0..q.state_count() {
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                    x0 - 6.0,
                    top + (st as f64 + 0.6) * ch,
                    state_label(st.min(WORKPLACE_STATES - 1))
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{}">scale {lo:.4} (light) to {hi:.4} (dark)</text>"#,
        HEIGHT - 10
    );
    close(s)
}

/// Grouped bars: the reference score, then each arm's mean final productivity.
pub fn groups_svg(report: &RunReport) -> String {
    let mut s = open("Mean productivity by group");
    let mut series: Vec<(String, BTreeMap<GroupLabel, f64>)> = Vec::new();
    let mut reference = BTreeMap::new();
    for arm in &report.metrics.arms {
        let mut m = BTreeMap::new();
        for g in &arm.groups {
            m.insert(g.group, g.mean_final);
            reference.insert(g.group, g.reference_productivity);
        }
        series.push((arm.name.clone(), m));
    }
    series.insert(0, ("reference".to_string(), reference.clone()));
    let groups: Vec<GroupLabel> = reference.keys().copied().collect();
    let max = series
        .iter()
        .flat_map(|(_, m)| m.values().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let (left, top, bottom) = (60.0, 50.0, f64::from(HEIGHT) - 60.0);
    let plot_w = f64::from(WIDTH) - left - 20.0;
    let slot = plot_w / groups.len().max(1) as f64;
    let bar = (slot * 0.8) / series.len() as f64;
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{bottom}" x2="{:.1}" y2="{bottom}" stroke="#333"/>"##,
        left + plot_w
    );
    for tick in 0..=4 {
        let v = max * f64::from(tick) / 4.0;
        let y = bottom - (bottom - top) * f64::from(tick) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.2}</text>"#,
            left - 6.0
        );
    }
    for (gi, g) in groups.iter().enumerate() {
        let gx = left + gi as f64 * slot + slot * 0.1;
        for (si, (name, m)) in series.iter().enumerate() {
            let v = m.get(g).copied().unwrap_or(0.0);
            let h = (bottom - top) * (v / max).max(0.0);
            let color = if si == 0 {
                "#9a9a9a"
            } else {
                PALETTE[(si - 1) % PALETTE.len()]
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar:.1}" height="{h:.1}" fill="{color}"><title>{} {} {v:.4}</title></rect>"#,
                gx + si as f64 * bar,
                bottom - h,
                g,
                escape(name)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{g}</text>"#,
            gx + slot * 0.4,
            bottom + 16.0
        );
    }
    legend(
        &mut s,
        series.iter().enumerate().map(|(i, (n, _))| {
            (
                n.clone(),
                if i == 0 {
                    "#9a9a9a"
                } else {
                    PALETTE[(i - 1) % PALETTE.len()]
                },
            )
        }),
    );
    close(s)
}

fn legend(s: &mut String, entries: impl Iterator<Item = (String, &'static str)>) {
    for (i, (name, color)) in entries.enumerate() {
        let x = 60.0 + i as f64 * 130.0;
        let y = f64::from(HEIGHT) - 22.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#,
            y - 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{y:.1}">{}</text>"#,
            x + 16.0,
            escape(&name)
        );
    }
}

/// Intervention counts per content over time, all arms pooled, in at most 50 bins.
pub fn interventions_svg(stored: &StoredArtifacts) -> String {
    let mut s = open("Interventions over time");
    if stored.interventions.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">no interventions</text>"#,
            WIDTH / 2,
            HEIGHT / 2
        );
        return close(s);
    }
    let ticks = stored.meta.ticks.max(1);
    let bins = ticks.min(50);
    let mut counts: BTreeMap<ContentId, Vec<u64>> = BTreeMap::new();
    for r in &stored.interventions {
        let b = (r.tick.min(ticks - 1) * bins / ticks) as usize;
        counts
            .entry(r.content_id)
            .or_insert_with(|| vec![0; bins as usize])[b] += 1;
    }
    let max = counts.values().flatten().copied().max().unwrap_or(1).max(1) as f64;
    let (left, top, bottom) = (60.0, 50.0, f64::from(HEIGHT) - 60.0);
    let plot_w = f64::from(WIDTH) - left - 20.0;
    let step = if bins > 1 {
        plot_w / (bins - 1) as f64
    } else {
        0.0
    };
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{bottom}" x2="{:.1}" y2="{bottom}" stroke="#333"/>"##,
        left + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{max:.0}</text>"#,
        left - 6.0,
        top + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0</text>"#,
        left - 6.0,
        bottom
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">tick {}</text>"#,
        left + plot_w,
        bottom + 16.0,
        ticks
    );
    let mut entries = Vec::new();
    for (i, (content, series)) in counts.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(b, &c)| {
                let x = left + b as f64 * step;
                let y = bottom - (bottom - top) * c as f64 / max;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
        entries.push((content.name().to_string(), color));
    }
    legend(&mut s, entries.into_iter());
    close(s)
}

pub fn render_all(stored: &StoredArtifacts, report: &RunReport) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    files.insert(
        "qvalues.svg".to_string(),
        qvalues_svg(&stored.qtables).into_bytes(),
    );
    files.insert("groups.svg".to_string(), groups_svg(report).into_bytes());
    files.insert(
        "interventions.svg".to_string(),
        interventions_svg(stored).into_bytes(),
    );
    files
}

use std::fmt::Write;

use crate::sim::escape_xml;

use super::{DeviceConfig, Frame, ZoneKind};

/// Storyboard stride: every k-th frame is drawn.
pub const STORYBOARD_EVERY: usize = 10;

/// One JSON object per line.
pub fn trace_jsonl(frames: &[Frame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frames serialize"));
        out.push('\n');
    }
    out
}

const PAD: f64 = 12.0;
const GAP: f64 = 24.0;
const PER_ROW: usize = 4;

fn zone_fill(kind: ZoneKind) -> &'static str {
    match kind {
        ZoneKind::Cold => "#dbe9f7",
        ZoneKind::Warm => "#f7f0d4",
        ZoneKind::Hot => "#f7d9d4",
    }
}

/// Grid snapshots of every `every`-th frame plus the last one.
pub fn storyboard_svg(config: &DeviceConfig, frames: &[Frame], every: usize) -> String {
    let every = every.max(1);
    let mut picked: Vec<&Frame> = frames.iter().step_by(every).collect();
    if let Some(last) = frames.last() {
        if picked.last().map(|f| f.tick) != Some(last.tick) {
            picked.push(last);
        }
    }
    let panel_w = config.width as f64 * PAD;
    let panel_h = config.height as f64 * PAD + 16.0;
    let cols = picked.len().clamp(1, PER_ROW);
    let rows = picked.len().div_ceil(PER_ROW).max(1);
    let width = GAP + cols as f64 * (panel_w + GAP);
    let height = GAP + rows as f64 * (panel_h + GAP);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    for (i, f) in picked.iter().enumerate() {
        let ox = GAP + (i % PER_ROW) as f64 * (panel_w + GAP);
        let oy = GAP + (i / PER_ROW) as f64 * (panel_h + GAP);
        let _ = writeln!(s, r#"<g class="frame" data-tick="{}">"#, f.tick);
        let _ = writeln!(
            s,
            r#"<text x="{ox:.1}" y="{:.1}" font-size="10" font-family="sans-serif">t={} {}: {}</text>"#,
            oy + 10.0,
            f.tick,
            escape_xml(&f.op),
            escape_xml(&f.phase)
        );
        let gy = oy + 16.0;
        for z in &config.zones {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{gy:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                ox + z.start as f64 * PAD,
                (z.end - z.start) as f64 * PAD,
                config.height as f64 * PAD,
                zone_fill(z.kind)
            );
        }
        for c in 0..=config.width {
            let x = ox + c as f64 * PAD;
            let _ = writeln!(
                s,
                r##"<path d="M{x:.1} {gy:.1} v{:.1}" stroke="#bbbbbb" stroke-width="0.5"/>"##,
                config.height as f64 * PAD
            );
        }
        for r in 0..=config.height {
            let y = gy + r as f64 * PAD;
            let _ = writeln!(s, r##"<path d="M{ox:.1} {y:.1} h{panel_w:.1}" stroke="#bbbbbb" stroke-width="0.5"/>"##);
        }
        for d in &f.droplets {
            let hot = f.active.contains(&d.id);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" rx="4" fill="{}" stroke="black" stroke-width="0.5"/>"#,
                ox + d.col as f64 * PAD + 1.0,
                gy + d.row as f64 * PAD + 1.0,
                d.pads as f64 * PAD - 2.0,
                PAD - 2.0,
                if hot { "#e6550d" } else { "#3182bd" }
            );
            let label = d.sample.map_or_else(|| format!("d{}", d.id), |s| format!("#{s}"));
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-size="7" font-family="sans-serif" fill="white">{}</text>"#,
                ox + d.col as f64 * PAD + 2.0,
                gy + d.row as f64 * PAD + 8.5,
                escape_xml(&label)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

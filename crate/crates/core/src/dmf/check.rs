//! Trace validation from frames alone, without trusting the router.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DeviceConfig, DropletView, Frame, ZoneKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tick: u64,
    pub message: String,
}

fn cells(d: &DropletView) -> impl Iterator<Item = (i32, i32)> + '_ {
    (0..d.pads as i32).map(move |k| (d.col + k, d.row))
}

fn distance(a: &DropletView, b: &DropletView) -> i32 {
    let mut best = i32::MAX;
    for (ac, ar) in cells(a) {
        for (bc, br) in cells(b) {
            best = best.min((ac - bc).abs().max((ar - br).abs()));
        }
    }
    best
}

fn zone_kind(config: &DeviceConfig, col: i32) -> Option<ZoneKind> {
    config.zones.iter().find(|z| z.start <= col && col < z.end).map(|z| z.kind)
}

fn inside(config: &DeviceConfig, d: &DropletView, kind: ZoneKind) -> bool {
    cells(d).all(|(c, _)| zone_kind(config, c) == Some(kind))
}

fn is_handling(f: &Frame) -> bool {
    matches!((f.op.as_str(), f.phase.as_str()), ("mix", "contact" | "merge") | ("split", "stretch" | "recede"))
}

/// Checks clearance, single-pad moves, cold-zone liquid handling, zone
/// discipline of holds and volume conservation.
pub fn check_trace(config: &DeviceConfig, frames: &[Frame]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |tick: u64, message: String| out.push(Violation { tick, message });
    let mut prev: Option<&Frame> = None;
    for f in frames {
        let t = f.tick;
        if let Some(p) = prev {
            if f.tick != p.tick + 1 {
                flag(t, format!("tick jumps from {} to {}", p.tick, f.tick));
            }
            let before: HashMap<u32, &DropletView> = p.droplets.iter().map(|d| (d.id, d)).collect();
            for d in &f.droplets {
                if let Some(q) = before.get(&d.id) {
                    let step = (d.col - q.col).abs() + (d.row - q.row).abs();
                    if step > 1 || d.pads != q.pads {
                        flag(
                            t,
                            format!("droplet {} jumps from ({}, {}) to ({}, {})", d.id, q.col, q.row, d.col, d.row),
                        );
                    }
                }
            }
            if f.op != "inject" {
                let total = |fr: &Frame| fr.droplets.iter().map(|d| d.volume_ul).sum::<f64>() + fr.disposed_ul;
                if (total(f) - total(p)).abs() > 1e-6 {
                    flag(t, format!("volume changes from {} to {} µL", total(p), total(f)));
                }
            }
        }
        for d in &f.droplets {
            if d.col < 0 || d.row < 0 || d.row >= config.height || d.col + d.pads as i32 > config.width || d.pads == 0 {
                flag(t, format!("droplet {} is off the grid", d.id));
            }
        }
        for (i, a) in f.droplets.iter().enumerate() {
            for b in &f.droplets[i + 1..] {
                let dist = distance(a, b);
                if dist >= 2 {
                    continue;
                }
                let sanctioned = f.sanctioned.iter().any(|p| p.contains(&a.id) && p.contains(&b.id));
                if !sanctioned || dist == 0 || !matches!(f.op.as_str(), "mix" | "split") {
                    flag(t, format!("droplets {} and {} are {dist} pad(s) apart", a.id, b.id));
                }
            }
        }
        if is_handling(f) {
            for id in &f.active {
                if let Some(d) = f.droplets.iter().find(|d| d.id == *id) {
                    if !inside(config, d, ZoneKind::Cold) {
                        flag(t, format!("{} of droplet {} outside the cold zone", f.op, d.id));
                    }
                }
            }
        }
        for h in &f.hold {
            match f.droplets.iter().find(|d| d.id == h.droplet) {
                Some(d) if inside(config, d, h.zone) => {}
                _ => flag(t, format!("droplet {} holds outside the {} zone", h.droplet, h.zone)),
            }
        }
        prev = Some(f);
    }
    out
}

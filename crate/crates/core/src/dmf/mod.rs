//! Virtual digital-microfluidic device: a pad grid split into temperature
//! zones, droplets as horizontal strips, and a frame-by-frame trace of
//! every move.

mod check;
mod render;
mod replay;
mod route;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{SampleId, CELSIUS_ZERO};

pub use check::{check_trace, Violation};
pub use render::{storyboard_svg, trace_jsonl, STORYBOARD_EVERY};
pub use replay::compile_protocol;
pub use route::{strip_distance, Pos};

use route::{clear, plan_prioritized, Agent, Grid, Reservation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Cold,
    Warm,
    Hot,
}

impl fmt::Display for ZoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoneKind::Cold => "cold",
            ZoneKind::Warm => "warm",
            ZoneKind::Hot => "hot",
        })
    }
}

/// Columns `start..end` held at a nominal temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    pub start: i32,
    pub end: i32,
    pub nominal_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub width: i32,
    pub height: i32,
    pub zones: Vec<Zone>,
    /// Upper bound of the cold range, °C.
    pub cold_max_c: f64,
    /// Upper bound of the warm range, °C.
    pub warm_max_c: f64,
    pub unit_volume_ul: f64,
    /// Injection ports, tried in order.
    pub ports: Vec<Pos>,
    /// Where droplets leave the grid.
    pub waste: Pos,
    /// Seconds of chemical time per hold frame.
    pub hold_quantum_s: f64,
    pub max_hold_frames: usize,
    pub tick_budget: usize,
    pub retries: usize,
    pub seed: u64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self::with_size(16, 8)
    }
}

impl DeviceConfig {
    /// Cold left half, warm third quarter, hot last quarter; ports every
    /// other pad along the top and bottom rows of the cold zone.
    pub fn with_size(width: i32, height: i32) -> Self {
        let (half, three) = (width / 2, width * 3 / 4);
        let ports =
            [0, height - 1].iter().flat_map(|&r| (0..half).step_by(2).take(4).map(move |c| Pos::new(c, r))).collect();
        Self {
            width,
            height,
            zones: vec![
                Zone { kind: ZoneKind::Cold, start: 0, end: half, nominal_c: 4.0 },
                Zone { kind: ZoneKind::Warm, start: half, end: three, nominal_c: 20.0 },
                Zone { kind: ZoneKind::Hot, start: three, end: width, nominal_c: 37.0 },
            ],
            cold_max_c: 10.0,
            warm_max_c: 30.0,
            unit_volume_ul: 1.0,
            ports,
            waste: Pos::new(0, height / 2),
            hold_quantum_s: 10.0,
            max_hold_frames: 1000,
            tick_budget: 10_000,
            retries: 8,
            seed: 0,
        }
    }

    /// A single cold zone covering a `width × height` grid.
    pub fn all_cold(width: i32, height: i32) -> Self {
        Self {
            width,
            height,
            zones: vec![Zone { kind: ZoneKind::Cold, start: 0, end: width, nominal_c: 4.0 }],
            ports: vec![Pos::new(0, 0), Pos::new(0, height - 1)],
            waste: Pos::new(0, height / 2),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |m: String| Err(DeviceError::InvalidConfig(m));
        if self.width < 8 || self.height < 4 {
            return bad(format!("grid must be at least 8x4, got {}x{}", self.width, self.height));
        }
        let mut next = 0;
        for z in &self.zones {
            if z.start != next || z.end <= z.start {
                return bad(format!("zones must partition columns 0..{} in order", self.width));
            }
            next = z.end;
        }
        if next != self.width {
            return bad(format!("zones must partition columns 0..{} in order", self.width));
        }
        if !self.zones.iter().any(|z| z.kind == ZoneKind::Cold) {
            return bad("a cold zone is required for staging".into());
        }
        if self.cold_max_c.partial_cmp(&self.warm_max_c) != Some(std::cmp::Ordering::Less) {
            return bad("cold range must lie below the warm range".into());
        }
        if !(self.unit_volume_ul > 0.0 && self.unit_volume_ul.is_finite()) {
            return bad("unit volume must be positive".into());
        }
        if self.hold_quantum_s.is_nan() || self.hold_quantum_s <= 0.0 || self.max_hold_frames == 0 {
            return bad("hold quantum and frame cap must be positive".into());
        }
        for p in self.ports.iter().chain([&self.waste]) {
            if self.zone_at(*p).map(|z| z.kind) != Some(ZoneKind::Cold) {
                return bad(format!("port ({}, {}) is not inside the cold zone", p.col, p.row));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Grid {
        Grid { width: self.width, height: self.height }
    }

    pub fn zone_at(&self, p: Pos) -> Option<&Zone> {
        if p.row < 0 || p.row >= self.height {
            return None;
        }
        self.zones.iter().find(|z| z.start <= p.col && p.col < z.end)
    }

    /// The zone containing every pad of the strip, if it lies in one.
    pub fn zone_of_strip(&self, p: Pos, pads: u32) -> Option<&Zone> {
        let z = self.zone_at(p)?;
        (p.col + pads as i32 <= z.end).then_some(z)
    }

    /// Staging and work area: the first cold zone.
    pub fn cold(&self) -> &Zone {
        self.zones.iter().find(|z| z.kind == ZoneKind::Cold).expect("validated config has a cold zone")
    }

    pub fn zone_kind_for(&self, temperature_k: f64) -> ZoneKind {
        let c = temperature_k - CELSIUS_ZERO;
        if c <= self.cold_max_c {
            ZoneKind::Cold
        } else if c <= self.warm_max_c {
            ZoneKind::Warm
        } else {
            ZoneKind::Hot
        }
    }

    pub fn pads_for(&self, volume_ul: f64) -> u32 {
        ((volume_ul / self.unit_volume_ul) - 1e-9).ceil().max(1.0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DropletId(pub u32);

impl fmt::Display for DropletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Droplet {
    pub id: DropletId,
    pub sample: Option<SampleId>,
    pub volume_ul: f64,
    pub pos: Pos,
    pub pads: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletView {
    pub id: u32,
    pub col: i32,
    pub row: i32,
    pub pads: u32,
    pub volume_ul: f64,
    pub sample: Option<u32>,
}

/// Chemical time advancing for one droplet during a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hold {
    pub droplet: u32,
    pub zone: ZoneKind,
    /// Seconds of chemical time elapsed at this frame.
    pub elapsed: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub op: String,
    pub phase: String,
    pub droplets: Vec<DropletView>,
    /// Droplets the operation is acting on.
    pub active: Vec<u32>,
    /// Pairs allowed to be closer than the clearance in this frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sanctioned: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hold: Vec<Hold>,
    /// Volume sent off-grid so far, µL.
    pub disposed_ul: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("invalid device configuration: {0}")]
    InvalidConfig(String),
    #[error("staging area is full; live droplets: {}", live.join(", "))]
    StagingFull { live: Vec<String> },
    #[error("a {volume_ul} µL droplet needs {pads} pads, more than fit in the {limit}-pad cold zone")]
    TooLarge { volume_ul: f64, pads: u32, limit: i32 },
    #[error("unknown droplet {0}")]
    UnknownDroplet(DropletId),
    #[error("target ({}, {}) for {droplet} is off the grid or inside another droplet's clearance", target.col, target.row)]
    TargetBlocked { droplet: DropletId, target: Pos },
    #[error("no route for {droplet} within {budget} ticks\n{snapshot}")]
    RoutingFailed { droplet: DropletId, budget: usize, snapshot: String },
    #[error("no free {what} site in the cold zone\n{snapshot}")]
    NoSite { what: &'static str, snapshot: String },
    #[error("cannot split a {volume_ul} µL droplet; the minimum is {minimum_ul} µL")]
    TooSmallToSplit { volume_ul: f64, minimum_ul: f64 },
    #[error("split proportion must lie strictly between 0 and 1, got {0}")]
    BadProportion(f64),
    #[error("no {kind} zone on this device for {temperature_c} °C")]
    NoZone { kind: ZoneKind, temperature_c: f64 },
    #[error("{droplet} appears twice in one move")]
    DuplicateMove { droplet: DropletId },
    #[error("the vessel cannot be used on the device ({op})")]
    VesselOffDevice { op: &'static str },
    #[error("sample {0} has no droplet")]
    UnknownSample(SampleId),
    #[error("protocol step {step} ({op}): {source}")]
    AtStep {
        step: usize,
        op: &'static str,
        #[source]
        source: Box<DeviceError>,
    },
}

/// Device state plus the append-only frame trace.
#[derive(Debug, Clone)]
pub struct Device {
    config: DeviceConfig,
    droplets: BTreeMap<DropletId, Droplet>,
    next_id: u32,
    frames: Vec<Frame>,
    disposed_ul: f64,
    rng: ChaCha8Rng,
}

impl Device {
    pub fn new(config: DeviceConfig) -> Result<Self, DeviceError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { config, droplets: BTreeMap::new(), next_id: 0, frames: Vec::new(), disposed_ul: 0.0, rng })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn droplets(&self) -> impl Iterator<Item = &Droplet> {
        self.droplets.values()
    }

    pub fn droplet(&self, id: DropletId) -> Result<&Droplet, DeviceError> {
        self.droplets.get(&id).ok_or(DeviceError::UnknownDroplet(id))
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn disposed_volume(&self) -> f64 {
        self.disposed_ul
    }

    /// ASCII picture of the grid: zones as `.`, `,`, `^` and droplets as
    /// their id in base 36.
    pub fn snapshot(&self) -> String {
        let mut rows: Vec<Vec<char>> = (0..self.config.height)
            .map(|r| {
                (0..self.config.width)
                    .map(|c| match self.config.zone_at(Pos::new(c, r)).map(|z| z.kind) {
                        Some(ZoneKind::Cold) => '.',
                        Some(ZoneKind::Warm) => ',',
                        _ => '^',
                    })
                    .collect()
            })
            .collect();
        for d in self.droplets.values() {
            let ch = std::char::from_digit(d.id.0 % 36, 36).unwrap_or('#');
            for k in 0..d.pads as i32 {
                if let Some(cell) = rows.get_mut(d.pos.row as usize).and_then(|r| r.get_mut((d.pos.col + k) as usize)) {
                    *cell = ch;
                }
            }
        }
        rows.into_iter().map(|r| r.into_iter().collect::<String>()).collect::<Vec<_>>().join("\n")
    }

    fn live_names(&self) -> Vec<String> {
        self.droplets
            .values()
            .map(|d| match d.sample {
                Some(s) => format!("{} (sample {s}, {} µL)", d.id, d.volume_ul),
                None => format!("{} ({} µL)", d.id, d.volume_ul),
            })
            .collect()
    }

    fn emit(&mut self, op: &str, phase: &str, active: &[DropletId], sanctioned: Vec<[u32; 2]>, hold: Vec<Hold>) {
        let droplets = self
            .droplets
            .values()
            .map(|d| DropletView {
                id: d.id.0,
                col: d.pos.col,
                row: d.pos.row,
                pads: d.pads,
                volume_ul: d.volume_ul,
                sample: d.sample.map(|s| s.0),
            })
            .collect();
        self.frames.push(Frame {
            tick: self.frames.len() as u64,
            op: op.to_string(),
            phase: phase.to_string(),
            droplets,
            active: active.iter().map(|d| d.0).collect(),
            sanctioned,
            hold,
            disposed_ul: self.disposed_ul,
        });
    }

    /// True when a strip at `p` keeps clearance from every droplet not in
    /// `ignore`.
    fn is_clear(&self, p: Pos, pads: u32, ignore: &[DropletId]) -> bool {
        self.config.grid().fits(p, pads)
            && self.droplets.values().filter(|d| !ignore.contains(&d.id)).all(|d| clear(p, pads, d.pos, d.pads))
    }

    fn check_fits_cold(&self, volume_ul: f64) -> Result<u32, DeviceError> {
        let pads = self.config.pads_for(volume_ul);
        let cold = self.config.cold();
        if pads as i32 > cold.end - cold.start {
            return Err(DeviceError::TooLarge { volume_ul, pads, limit: cold.end - cold.start });
        }
        Ok(pads)
    }

    fn fresh_id(&mut self) -> DropletId {
        let id = DropletId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Places a new droplet at the first free port.
    pub fn inject(&mut self, sample: Option<SampleId>, volume_ul: f64) -> Result<DropletId, DeviceError> {
        let pads = self.check_fits_cold(volume_ul)?;
        let cold = self.config.cold().clone();
        let port = self
            .config
            .ports
            .iter()
            .copied()
            .find(|p| p.col + pads as i32 <= cold.end && self.is_clear(*p, pads, &[]))
            .ok_or_else(|| DeviceError::StagingFull { live: self.live_names() })?;
        let id = self.fresh_id();
        self.droplets.insert(id, Droplet { id, sample, volume_ul, pos: port, pads });
        self.emit("inject", "inject", &[id], Vec::new(), Vec::new());
        Ok(id)
    }

    /// Routes one droplet to `target`.
    pub fn route(&mut self, id: DropletId, target: Pos) -> Result<usize, DeviceError> {
        self.route_many(&[(id, target)], "route", "route")
    }

    /// Moves several droplets at once. Droplets not listed keep their
    /// positions at the end but may step aside on the way. Returns the
    /// number of frames emitted.
    pub fn route_many(&mut self, moves: &[(DropletId, Pos)], op: &str, phase: &str) -> Result<usize, DeviceError> {
        let grid = self.config.grid();
        let mut movers: Vec<(DropletId, Agent)> = Vec::new();
        for &(id, goal) in moves {
            let d = self.droplet(id)?;
            if movers.iter().any(|(m, _)| *m == id) {
                return Err(DeviceError::DuplicateMove { droplet: id });
            }
            movers.push((id, Agent { pads: d.pads, start: d.pos, goal }));
        }
        let mover_ids: Vec<DropletId> = movers.iter().map(|(id, _)| *id).collect();
        for (id, a) in &movers {
            let others_clear = movers.iter().all(|(o, b)| o == id || clear(a.goal, a.pads, b.goal, b.pads));
            if !others_clear || !self.is_clear(a.goal, a.pads, &mover_ids) {
                return Err(DeviceError::TargetBlocked { droplet: *id, target: a.goal });
            }
        }
        if movers.iter().all(|(_, a)| a.start == a.goal) {
            return Ok(0);
        }
        let idle: Vec<(DropletId, Agent)> = self
            .droplets
            .values()
            .filter(|d| !mover_ids.contains(&d.id))
            .map(|d| (d.id, Agent { pads: d.pads, start: d.pos, goal: d.pos }))
            .collect();

        let budget = self.config.tick_budget;
        let mut last_failure = movers[0].0;
        let mut plan: Option<Vec<(DropletId, Vec<Pos>)>> = None;
        for attempt in 0..=self.config.retries {
            let mut order = movers.clone();
            let mut statics = Vec::new();
            if attempt == 0 {
                statics = idle.iter().map(|(_, a)| Reservation { pads: a.pads, path: vec![a.start] }).collect();
            } else {
                order.shuffle(&mut self.rng);
                let mut rest = idle.clone();
                rest.shuffle(&mut self.rng);
                order.extend(rest);
            }
            let agents: Vec<Agent> = order.iter().map(|(_, a)| *a).collect();
            match plan_prioritized(grid, &agents, &statics, budget) {
                Ok(paths) => {
                    plan = Some(order.iter().map(|(id, _)| *id).zip(paths).collect());
                    break;
                }
                Err(i) => last_failure = order[i].0,
            }
        }
        let plan = plan.ok_or_else(|| DeviceError::RoutingFailed {
            droplet: last_failure,
            budget,
            snapshot: self.snapshot(),
        })?;
        let length = plan.iter().map(|(_, p)| p.len()).max().unwrap_or(1);
        for t in 1..length {
            for (id, path) in &plan {
                let d = self.droplets.get_mut(id).expect("planned droplets are live");
                d.pos = path[t.min(path.len() - 1)];
            }
            self.emit(op, phase, &mover_ids, Vec::new(), Vec::new());
        }
        Ok(length - 1)
    }

    /// A free staging position for a strip of `pads`, ports first, then
    /// anywhere along the top and bottom rows of the cold zone.
    fn staging_slot(&self, pads: u32, moving: &[DropletId], taken: &[(Pos, u32)]) -> Option<Pos> {
        let cold = self.config.cold();
        let rows = [0, self.config.height - 1];
        let mut candidates: Vec<Pos> = self.config.ports.clone();
        candidates.extend(rows.iter().flat_map(|&r| (cold.start..cold.end).map(move |c| Pos::new(c, r))));
        candidates.into_iter().find(|p| {
            p.col + pads as i32 <= cold.end
                && self.is_clear(*p, pads, moving)
                && taken.iter().all(|(q, n)| clear(*p, pads, *q, *n))
        })
    }

    /// Middle rows first.
    fn work_rows(&self) -> Vec<i32> {
        let h = self.config.height;
        let mut rows: Vec<i32> = (1..h - 1).collect();
        rows.sort_by_key(|r| ((2 * r - (h - 1)).abs(), *r));
        rows
    }

    fn park_all(&mut self, ids: &[DropletId], op: &str) -> Result<(), DeviceError> {
        let mut moves = Vec::new();
        let mut taken = Vec::new();
        for id in ids {
            let pads = self.droplet(*id)?.pads;
            let slot = self
                .staging_slot(pads, ids, &taken)
                .ok_or_else(|| DeviceError::StagingFull { live: self.live_names() })?;
            taken.push((slot, pads));
            moves.push((*id, slot));
        }
        self.route_many(&moves, op, "park")?;
        Ok(())
    }

    /// Brings `b` next to `a` in the cold zone and fuses them. The result
    /// is parked back in staging.
    pub fn merge_droplets(
        &mut self,
        a: DropletId,
        b: DropletId,
        sample: Option<SampleId>,
    ) -> Result<DropletId, DeviceError> {
        let (da, db) = (self.droplet(a)?.clone(), self.droplet(b)?.clone());
        if a == b {
            return Err(DeviceError::DuplicateMove { droplet: a });
        }
        let volume = da.volume_ul + db.volume_ul;
        let pads = self.check_fits_cold(volume)?;
        let cold = self.config.cold().clone();
        let span = (da.pads + 1 + db.pads) as i32;
        let site = self
            .work_rows()
            .into_iter()
            .flat_map(|r| (cold.start..=cold.end - span).map(move |c| Pos::new(c, r)))
            .find(|p| self.is_clear(*p, span as u32, &[a, b]))
            .ok_or_else(|| DeviceError::NoSite { what: "merge", snapshot: self.snapshot() })?;
        let b_site = Pos::new(site.col + da.pads as i32 + 1, site.row);
        self.route_many(&[(a, site), (b, b_site)], "mix", "approach")?;
        self.droplets.get_mut(&b).expect("live").pos = Pos::new(b_site.col - 1, site.row);
        self.emit("mix", "contact", &[a, b], vec![[a.0, b.0]], Vec::new());
        self.droplets.remove(&a);
        self.droplets.remove(&b);
        let id = self.fresh_id();
        self.droplets.insert(id, Droplet { id, sample, volume_ul: volume, pos: site, pads });
        self.emit("mix", "merge", &[id], Vec::new(), Vec::new());
        self.park_all(&[id], "mix")?;
        Ok(id)
    }

    /// Pulls a droplet apart in the cold zone. The first child takes
    /// `proportion` of the volume, rounded to 0.01 µL.
    pub fn split_droplet(
        &mut self,
        id: DropletId,
        proportion: f64,
        samples: [Option<SampleId>; 2],
    ) -> Result<(DropletId, DropletId), DeviceError> {
        let d = self.droplet(id)?.clone();
        let minimum = 2.0 * self.config.unit_volume_ul;
        if d.volume_ul < minimum - 1e-9 {
            return Err(DeviceError::TooSmallToSplit { volume_ul: d.volume_ul, minimum_ul: minimum });
        }
        if !(proportion > 0.0 && proportion < 1.0) {
            return Err(DeviceError::BadProportion(proportion));
        }
        let v1 = ((proportion * d.volume_ul * 100.0).round() / 100.0).clamp(0.01, d.volume_ul - 0.01);
        let v2 = d.volume_ul - v1;
        let (n1, n2) = (self.config.pads_for(v1), self.config.pads_for(v2));
        let cold = self.config.cold().clone();
        // receded footprint: child 1 at x-1, child 2 ending at x+n1+n2
        let span = n1 + n2 + 2;
        let site = self
            .work_rows()
            .into_iter()
            .flat_map(|r| (cold.start + 1..=cold.end + 1 - span as i32).map(move |c| Pos::new(c, r)))
            .find(|p| self.is_clear(Pos::new(p.col - 1, p.row), span, &[id]))
            .ok_or_else(|| DeviceError::NoSite { what: "split", snapshot: self.snapshot() })?;
        self.route_many(&[(id, site)], "split", "approach")?;
        self.droplets.remove(&id);
        let c1 = self.fresh_id();
        let c2 = self.fresh_id();
        self.droplets.insert(c1, Droplet { id: c1, sample: samples[0], volume_ul: v1, pos: site, pads: n1 });
        let right = Pos::new(site.col + n1 as i32, site.row);
        self.droplets.insert(c2, Droplet { id: c2, sample: samples[1], volume_ul: v2, pos: right, pads: n2 });
        self.emit("split", "stretch", &[c1, c2], vec![[c1.0, c2.0]], Vec::new());
        self.droplets.get_mut(&c1).expect("live").pos.col -= 1;
        self.droplets.get_mut(&c2).expect("live").pos.col += 1;
        self.emit("split", "recede", &[c1, c2], Vec::new(), Vec::new());
        self.park_all(&[c1, c2], "split")?;
        Ok((c1, c2))
    }

    /// Holds one droplet at a temperature for `duration` seconds.
    pub fn thermal_park(&mut self, id: DropletId, temperature_k: f64, duration: f64) -> Result<(), DeviceError> {
        self.thermal_park_many(&[(id, temperature_k, duration)])
    }

    /// Parks several droplets in their zones in parallel, holds each for
    /// its duration and returns them to where they started. Cold-range
    /// droplets stay put.
    pub fn thermal_park_many(&mut self, jobs: &[(DropletId, f64, f64)]) -> Result<(), DeviceError> {
        let mut kinds = Vec::new();
        for &(id, t, _) in jobs {
            self.droplet(id)?;
            let kind = self.config.zone_kind_for(t);
            if !self.config.zones.iter().any(|z| z.kind == kind) {
                return Err(DeviceError::NoZone { kind, temperature_c: t - CELSIUS_ZERO });
            }
            kinds.push(kind);
        }
        let active: Vec<DropletId> = jobs.iter().map(|j| j.0).collect();
        let travelers: Vec<DropletId> =
            jobs.iter().zip(&kinds).filter(|(_, k)| **k != ZoneKind::Cold).map(|(j, _)| j.0).collect();
        let homes: Vec<(DropletId, Pos)> = travelers.iter().map(|id| (*id, self.droplets[id].pos)).collect();

        let mut taken: Vec<(Pos, u32)> = Vec::new();
        let mut outbound = Vec::new();
        for (j, kind) in jobs.iter().zip(&kinds) {
            if *kind == ZoneKind::Cold {
                continue;
            }
            let pads = self.droplets[&j.0].pads;
            let target = self
                .config
                .zones
                .iter()
                .filter(|z| z.kind == *kind)
                .flat_map(|z| {
                    let rows = self.work_rows_all();
                    rows.into_iter().flat_map(move |r| (z.start..=z.end - pads as i32).map(move |c| Pos::new(c, r)))
                })
                .find(|p| self.is_clear(*p, pads, &travelers) && taken.iter().all(|(q, n)| clear(*p, pads, *q, *n)))
                .ok_or_else(|| DeviceError::NoSite { what: "parking", snapshot: self.snapshot() })?;
            taken.push((target, pads));
            outbound.push((j.0, target));
        }
        self.route_many(&outbound, "equilibrate", "travel")?;

        let quantum = self.config.hold_quantum_s;
        let counts: Vec<usize> =
            jobs.iter().map(|j| ((j.2 / quantum).ceil() as usize).clamp(1, self.config.max_hold_frames)).collect();
        let total = counts.iter().copied().max().unwrap_or(0);
        for k in 0..total {
            let hold = jobs
                .iter()
                .zip(&kinds)
                .zip(&counts)
                .filter(|(_, n)| k < **n)
                .map(|((j, kind), n)| Hold {
                    droplet: j.0 .0,
                    zone: *kind,
                    elapsed: if k + 1 == *n { j.2 } else { j.2 * (k + 1) as f64 / *n as f64 },
                    duration: j.2,
                })
                .collect();
            self.emit("equilibrate", "hold", &active, Vec::new(), hold);
        }
        self.route_many(&homes, "equilibrate", "return")?;
        Ok(())
    }

    /// Every row, middle first.
    fn work_rows_all(&self) -> Vec<i32> {
        let h = self.config.height;
        let mut rows: Vec<i32> = (0..h).collect();
        rows.sort_by_key(|r| ((2 * r - (h - 1)).abs(), *r));
        rows
    }

    /// Routes a droplet to the waste port and removes it.
    pub fn dispose(&mut self, id: DropletId) -> Result<(), DeviceError> {
        let d = self.droplet(id)?.clone();
        let waste = self.config.waste;
        self.route_many(&[(id, waste)], "dispose", "approach")?;
        self.droplets.remove(&id);
        self.disposed_ul += d.volume_ul;
        self.emit("dispose", "remove", &[id], Vec::new(), Vec::new());
        Ok(())
    }

    /// Total volume on the grid plus disposed volume.
    pub fn accounted_volume(&self) -> f64 {
        self.droplets.values().map(|d| d.volume_ul).sum::<f64>() + self.disposed_ul
    }
}

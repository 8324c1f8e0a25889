//! Test-only oracles shared by the integration suites. None of these call
//! into the code they check beyond building inputs.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use kaemsim::crn::{Complex, Network, RateLaw, SpeciesId};
use kaemsim::protocol::{EquilibrateRequest, Protocol, ProtocolOptions, SampleId, CELSIUS_ZERO};
use kaemsim::sim::Tolerances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Gillespie direct method for the birth-death process 0 -> X (k1), X -> 0 (k2)
// on the molecule-count scale. `k1` is a concentration flux, so the birth
// propensity is k1 * omega.

pub struct SsaMoments {
    pub runs: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SsaMoments {
    /// Standard error of the sample mean.
    pub fn mean_se(&self) -> f64 {
        (self.variance / self.runs as f64).sqrt()
    }
}

pub fn ssa_birth_death(
    k1: f64,
    k2: f64,
    omega: f64,
    x0: u64,
    t_end: f64,
    runs: usize,
    seed: u64,
) -> (SsaMoments, Vec<f64>) {
    let mut rng = rng(seed);
    let birth = k1 * omega;
    let mut finals = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut x = x0;
        let mut t = 0.0;
        loop {
            let death = k2 * x as f64;
            let total = birth + death;
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / total;
            if t > t_end {
                break;
            }
            if rng.random::<f64>() * total < birth {
                x += 1;
            } else {
                x -= 1;
            }
        }
        finals.push(x as f64);
    }
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let variance = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (SsaMoments { runs, mean, variance }, finals)
}

/// Standard error of the unbiased sample variance, from the fourth
/// central moment.
pub fn variance_se(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).sqrt()
}

// ---------------------------------------------------------------------------
// Joint-state breadth-first search for two strip droplets on a grid. Every
// tick each droplet stays or moves one pad in a 4-neighbourhood; every
// state must keep Chebyshev distance >= 2 between the strips. Returns the
// minimal makespan, or None when the goal state is unreachable.

pub type Cell = (i32, i32);

fn cells(p: Cell, pads: u32) -> impl Iterator<Item = Cell> {
    (0..pads as i32).map(move |k| (p.0 + k, p.1))
}

pub fn chebyshev_cells(a: Cell, a_pads: u32, b: Cell, b_pads: u32) -> i32 {
    let mut best = i32::MAX;
    for x in cells(a, a_pads) {
        for y in cells(b, b_pads) {
            best = best.min((x.0 - y.0).abs().max((x.1 - y.1).abs()));
        }
    }
    best
}

pub fn bfs_two_droplets(width: i32, height: i32, pads: [u32; 2], start: [Cell; 2], goal: [Cell; 2]) -> Option<usize> {
    let fits = |p: Cell, n: u32| p.0 >= 0 && p.1 >= 0 && p.1 < height && p.0 + n as i32 <= width;
    let ok = |a: Cell, b: Cell| fits(a, pads[0]) && fits(b, pads[1]) && chebyshev_cells(a, pads[0], b, pads[1]) >= 2;
    if !ok(start[0], start[1]) || !ok(goal[0], goal[1]) {
        return None;
    }
    let steps = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
    let mut seen: HashSet<(Cell, Cell)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((start[0], start[1]));
    queue.push_back(((start[0], start[1]), 0usize));
    while let Some(((a, b), d)) = queue.pop_front() {
        if a == goal[0] && b == goal[1] {
            return Some(d);
        }
        for da in steps {
            for db in steps {
                let na = (a.0 + da.0, a.1 + da.1);
                let nb = (b.0 + db.0, b.1 + db.1);
                if ok(na, nb) && seen.insert((na, nb)) {
                    queue.push_back(((na, nb), d + 1));
                }
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Glyph bounding boxes read back from a rendered score.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn overlaps(&self, o: &BBox) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

/// Attribute map of every element with the given tag.
pub fn elements(svg: &str, tag: &str) -> Vec<HashMap<String, String>> {
    let open = format!("<{tag} ");
    let mut out = Vec::new();
    let mut rest = svg;
    while let Some(i) = rest.find(&open) {
        rest = &rest[i + open.len()..];
        let end = rest.find('>').expect("element is closed");
        let body = &rest[..end];
        let mut attrs = HashMap::new();
        let mut s = body;
        while let Some(eq) = s.find("=\"") {
            let key = s[..eq].trim().rsplit(' ').next().unwrap().to_string();
            let after = &s[eq + 2..];
            let close = after.find('"').expect("quoted attribute");
            attrs.insert(key, after[..close].to_string());
            s = &after[close + 1..];
        }
        out.push(attrs);
    }
    out
}

fn num(a: &HashMap<String, String>, k: &str) -> f64 {
    a[k].parse().unwrap_or_else(|_| panic!("{k} = {:?}", a[k]))
}

fn path_numbers(d: &str) -> Vec<f64> {
    d.split(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-'))
        .filter(|t| !t.is_empty() && *t != "-")
        .map(|t| t.parse().unwrap())
        .collect()
}

/// Connector glyphs, empty-set glyphs and multiplicity badges.
pub fn glyph_boxes(svg: &str) -> Vec<(String, BBox)> {
    let mut out = Vec::new();
    for a in elements(svg, "rect") {
        let (x, y) = (num(&a, "x"), num(&a, "y"));
        out.push(("reagent".into(), BBox { x0: x, y0: y, x1: x + num(&a, "width"), y1: y + num(&a, "height") }));
    }
    for a in elements(svg, "polygon") {
        let pts = path_numbers(&a["points"]);
        let xs: Vec<f64> = pts.iter().step_by(2).copied().collect();
        let ys: Vec<f64> = pts.iter().skip(1).step_by(2).copied().collect();
        out.push((
            "product".into(),
            BBox {
                x0: xs.iter().copied().fold(f64::INFINITY, f64::min),
                x1: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                y0: ys.iter().copied().fold(f64::INFINITY, f64::min),
                y1: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
        ));
    }
    for a in elements(svg, "circle") {
        let (cx, cy, r) = (num(&a, "cx"), num(&a, "cy"), num(&a, "r"));
        out.push(("catalyst".into(), BBox { x0: cx - r, y0: cy - r, x1: cx + r, y1: cy + r }));
    }
    for a in elements(svg, "path") {
        let class = a.get("class").map(String::as_str).unwrap_or("");
        if class == "source" || class == "sink" {
            // M x-r y a..., slash from (x-r-1, y+r+1) to (x+r+1, y-r-1)
            let n = path_numbers(&a["d"]);
            let (x, y) = (n[0], n[1]);
            let r = n[2];
            let cx = x + r;
            let e = r + 1.0;
            out.push((class.into(), BBox { x0: cx - e, y0: y - e, x1: cx + e, y1: y + e }));
        }
    }
    for a in elements(svg, "text") {
        if a.get("class").map(String::as_str) == Some("multiplicity") {
            let (x, y) = (num(&a, "x"), num(&a, "y"));
            let w = 7.0;
            let (x0, x1) = if a["text-anchor"] == "end" { (x - w, x) } else { (x, x + w) };
            out.push(("badge".into(), BBox { x0, y0: y - 9.0, x1, y1: y + 1.0 }));
        }
    }
    out
}

pub fn overlapping_pairs(boxes: &[(String, BBox)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].1.overlaps(&boxes[j].1) {
                out.push((i, j));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// A recogniser for the DOT subset: graph header, node, edge and attribute
// statements, quoted or bare identifiers.

#[derive(Debug, Clone, PartialEq)]
enum DotTok {
    Id(String),
    Sym(&'static str),
}

fn dot_lex(src: &str) -> Result<Vec<DotTok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => {
                        s.push(*chars.get(i + 1).ok_or("dangling escape")?);
                        i += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(DotTok::Id(s));
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(DotTok::Sym("->"));
            i += 2;
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.' || chars[i] == '-')
            {
                if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                    break;
                }
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let numeral = word.trim_start_matches('-').chars().all(|c| c.is_ascii_digit() || c == '.');
            let ident =
                word.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') && !word.contains(['.', '-']);
            if !numeral && !ident {
                return Err(format!("bad identifier {word:?}"));
            }
            out.push(DotTok::Id(word));
        } else {
            let sym = match c {
                '{' => "{",
                '}' => "}",
                '[' => "[",
                ']' => "]",
                '=' => "=",
                ';' => ";",
                ',' => ",",
                _ => return Err(format!("unexpected character {c:?}")),
            };
            out.push(DotTok::Sym(sym));
            i += 1;
        }
    }
    Ok(out)
}

/// Parsed statements of a DOT digraph.
#[derive(Debug, Default)]
pub struct DotGraph {
    pub nodes: HashMap<String, HashMap<String, String>>,
    pub edges: Vec<(String, String, HashMap<String, String>)>,
}

pub fn parse_dot(src: &str) -> Result<DotGraph, String> {
    let toks = dot_lex(src)?;
    let mut i = 0;
    let id = |i: &mut usize| match toks.get(*i) {
        Some(DotTok::Id(s)) => {
            *i += 1;
            Ok(s.clone())
        }
        other => Err(format!("expected identifier at token {}, got {other:?}", *i)),
    };
    let sym = |i: &mut usize, s: &str| match toks.get(*i) {
        Some(DotTok::Sym(x)) if *x == s => {
            *i += 1;
            Ok(())
        }
        other => Err(format!("expected {s:?} at token {}, got {other:?}", *i)),
    };
    let attrs = |i: &mut usize| -> Result<HashMap<String, String>, String> {
        let mut m = HashMap::new();
        if toks.get(*i) != Some(&DotTok::Sym("[")) {
            return Ok(m);
        }
        *i += 1;
        while toks.get(*i) != Some(&DotTok::Sym("]")) {
            let k = id(i)?;
            sym(i, "=")?;
            let v = id(i)?;
            m.insert(k, v);
            if toks.get(*i) == Some(&DotTok::Sym(",")) || toks.get(*i) == Some(&DotTok::Sym(";")) {
                *i += 1;
            }
        }
        *i += 1;
        Ok(m)
    };
    let mut g = DotGraph::default();
    if id(&mut i)? != "digraph" {
        return Err("expected digraph".into());
    }
    if let Some(DotTok::Id(_)) = toks.get(i) {
        i += 1;
    }
    sym(&mut i, "{")?;
    while toks.get(i) != Some(&DotTok::Sym("}")) {
        let first = id(&mut i)?;
        match toks.get(i) {
            Some(DotTok::Sym("=")) => {
                i += 1;
                id(&mut i)?;
            }
            Some(DotTok::Sym("->")) => {
                i += 1;
                let second = id(&mut i)?;
                let a = attrs(&mut i)?;
                g.edges.push((first, second, a));
            }
            _ => {
                let a = attrs(&mut i)?;
                if !matches!(first.as_str(), "graph" | "node" | "edge") {
                    g.nodes.insert(first, a);
                }
            }
        }
        if toks.get(i) == Some(&DotTok::Sym(";")) {
            i += 1;
        }
    }
    i += 1;
    if i != toks.len() {
        return Err("trailing tokens after graph".into());
    }
    for (a, b, _) in &g.edges {
        if !g.nodes.contains_key(a) || !g.nodes.contains_key(b) {
            return Err(format!("edge {a} -> {b} references an undeclared node"));
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Random mass-action networks.

pub fn random_complex(rng: &mut ChaCha8Rng, species: usize, max_mult: u32) -> Complex {
    let mut c = Complex::new();
    for _ in 0..rng.random_range(0..=3) {
        c.add(SpeciesId(rng.random_range(0..species) as u32), rng.random_range(1..=max_mult));
    }
    c
}

pub fn random_network(rng: &mut ChaCha8Rng, max_species: usize, max_reactions: usize, max_mult: u32) -> Network {
    let mut n = Network::new();
    let s = rng.random_range(1..=max_species);
    for i in 0..s {
        let base = ["A", "B", "C", "A", "X", "B"][i % 6];
        n.add_species(base);
    }
    for _ in 0..rng.random_range(0..=max_reactions) {
        let r = random_complex(rng, s, max_mult);
        let mut p = random_complex(rng, s, max_mult);
        if r.is_empty() && p.is_empty() {
            p.add(SpeciesId(0), 1);
        }
        n.add_reaction(r, p, RateLaw::MassAction(rng.random_range(0.1..3.0))).unwrap();
    }
    n
}

pub fn shuffled_ids(rng: &mut ChaCha8Rng, n: usize) -> Vec<SpeciesId> {
    use rand::seq::SliceRandom;
    let mut v: Vec<SpeciesId> = (0..n as u32).map(SpeciesId).collect();
    v.shuffle(rng);
    v
}

pub type NamedComplex = Vec<(String, u32)>;

/// Complexes of every reaction, species by display name.
pub fn complexes_by_name(n: &Network) -> Vec<(NamedComplex, NamedComplex)> {
    let named = |c: &Complex| {
        let mut v: Vec<(String, u32)> = c.iter().map(|(s, m)| (n.name(s).to_string(), m)).collect();
        v.sort();
        v
    };
    n.reactions.iter().map(|r| (named(&r.reagents), named(&r.products))).collect()
}

// ---------------------------------------------------------------------------
// Script sources.

pub fn example(name: &str) -> String {
    std::fs::read_to_string(format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn example_names() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(format!("{}/examples", env!("CARGO_MANIFEST_DIR")))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".kae"))
        .collect();
    v.sort();
    v
}

/// The shipped predatorial script with its depth replaced.
pub fn predatorial(n: u32) -> String {
    let src = example("predatorial.kae");
    assert!(src.contains("let n = 5"));
    src.replace("let n = 5", &format!("let n = {n}"))
}

// ---------------------------------------------------------------------------
// Random generative programs: a fixed header plus a list of emission
// blocks. Blocks only reference the header's species, so any one of them
// can be wrapped in a conditional or removed.

pub struct GenProgram {
    pub header: String,
    pub blocks: Vec<String>,
}

impl GenProgram {
    pub fn assemble(&self, replace: Option<(usize, String)>) -> String {
        let mut s = self.header.clone();
        for (i, b) in self.blocks.iter().enumerate() {
            match &replace {
                Some((j, r)) if *j == i => s.push_str(r),
                _ => s.push_str(b),
            }
            s.push('\n');
        }
        s
    }
}

pub fn random_program(rng: &mut ChaCha8Rng) -> GenProgram {
    let globals = rng.random_range(2..=4);
    let decl: Vec<String> = (0..globals).map(|i| format!("g{i} @ {}", rng.random_range(0..4))).collect();
    let header = format!(
        "species {}\nfunction make(x) {{\n    species u @ x\n    u + g0 -> 2 u {{1}}\n    yield u\n}}\n",
        decl.join(", ")
    );
    let g = |rng: &mut ChaCha8Rng| format!("g{}", rng.random_range(0..globals));
    let k = |rng: &mut ChaCha8Rng| format!("{}", rng.random_range(1..20) as f64 / 4.0);
    let mut blocks = Vec::new();
    for _ in 0..rng.random_range(1..=6) {
        let b = match rng.random_range(0..5) {
            0 => format!("{} + {} -> {} {{{}}}", g(rng), g(rng), g(rng), k(rng)),
            1 => format!(
                "for i in 0..{} {{\n    species t @ 1\n    t -> {} {{{}}}\n}}",
                rng.random_range(0..4),
                g(rng),
                k(rng)
            ),
            2 => format!("let v = make({})\nv -> {} {{{}}}", k(rng), g(rng), k(rng)),
            3 => format!(
                "if {} {{\n    {} -> {} {{{}}}\n}} else {{\n    species w @ 2\n    w -> ∅ {{1}}\n}}",
                if rng.random_bool(0.5) { "1 < 2" } else { "2 < 1" },
                g(rng),
                g(rng),
                k(rng)
            ),
            _ => format!("species h @ {}\n2 h -> {} {{{}}}", rng.random_range(0..3), g(rng), k(rng)),
        };
        blocks.push(b);
    }
    GenProgram { header, blocks }
}

// ---------------------------------------------------------------------------
// Device trace oracle. Reads the JSON-lines trace as untyped JSON and
// checks it against the zone layout only.

pub struct ZoneSpan {
    pub kind: &'static str,
    pub start: i64,
    pub end: i64,
}

pub fn zone_spans(config: &kaemsim::dmf::DeviceConfig) -> Vec<ZoneSpan> {
    config
        .zones
        .iter()
        .map(|z| ZoneSpan {
            kind: match z.kind {
                kaemsim::dmf::ZoneKind::Cold => "cold",
                kaemsim::dmf::ZoneKind::Warm => "warm",
                kaemsim::dmf::ZoneKind::Hot => "hot",
            },
            start: z.start as i64,
            end: z.end as i64,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Drop {
    id: u64,
    col: i64,
    row: i64,
    pads: i64,
    volume: f64,
}

fn drops(frame: &serde_json::Value) -> Vec<Drop> {
    frame["droplets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| Drop {
            id: d["id"].as_u64().unwrap(),
            col: d["col"].as_i64().unwrap(),
            row: d["row"].as_i64().unwrap(),
            pads: d["pads"].as_i64().unwrap(),
            volume: d["volume_ul"].as_f64().unwrap(),
        })
        .collect()
}

fn gap(a: &Drop, b: &Drop) -> i64 {
    let dc = if a.col + a.pads <= b.col {
        b.col - (a.col + a.pads - 1)
    } else if b.col + b.pads <= a.col {
        a.col - (b.col + b.pads - 1)
    } else {
        0
    };
    dc.max((a.row - b.row).abs())
}

fn zone_of(zones: &[ZoneSpan], d: &Drop) -> Option<&'static str> {
    let first = zones.iter().find(|z| z.start <= d.col && d.col < z.end)?;
    (d.col + d.pads <= first.end).then_some(first.kind)
}

pub struct TraceStats {
    pub frames: usize,
    pub max_live: usize,
    pub close_frames: Vec<(u64, String, String)>,
}

pub fn oracle_check_trace(width: i64, height: i64, zones: &[ZoneSpan], jsonl: &str) -> Result<TraceStats, Vec<String>> {
    let mut errors = Vec::new();
    let frames: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut stats = TraceStats { frames: frames.len(), max_live: 0, close_frames: Vec::new() };
    let total =
        |f: &serde_json::Value| drops(f).iter().map(|d| d.volume).sum::<f64>() + f["disposed_ul"].as_f64().unwrap();
    for (k, f) in frames.iter().enumerate() {
        let tick = f["tick"].as_u64().unwrap();
        let op = f["op"].as_str().unwrap().to_string();
        let phase = f["phase"].as_str().unwrap().to_string();
        let ds = drops(f);
        stats.max_live = stats.max_live.max(ds.len());
        let sanctioned: Vec<(u64, u64)> = f
            .get("sanctioned")
            .and_then(|s| s.as_array())
            .map(|v| v.iter().map(|p| (p[0].as_u64().unwrap(), p[1].as_u64().unwrap())).collect())
            .unwrap_or_default();
        for d in &ds {
            if d.col < 0 || d.row < 0 || d.row >= height || d.col + d.pads > width || d.pads < 1 {
                errors.push(format!("tick {tick}: droplet {} off grid", d.id));
            }
        }
        for i in 0..ds.len() {
            for j in i + 1..ds.len() {
                let g = gap(&ds[i], &ds[j]);
                if g < 2 {
                    let pair = (ds[i].id.min(ds[j].id), ds[i].id.max(ds[j].id));
                    let allowed = (op == "mix" || op == "split")
                        && g == 1
                        && sanctioned.iter().any(|&(a, b)| (a.min(b), a.max(b)) == pair);
                    if !allowed {
                        errors.push(format!("tick {tick}: droplets {} and {} at distance {g}", pair.0, pair.1));
                    }
                    stats.close_frames.push((tick, op.clone(), phase.clone()));
                }
            }
        }
        let handling =
            matches!((op.as_str(), phase.as_str()), ("mix", "contact" | "merge") | ("split", "stretch" | "recede"));
        if handling {
            let active: Vec<u64> = f["active"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
            for d in ds.iter().filter(|d| active.contains(&d.id)) {
                if zone_of(zones, d) != Some("cold") {
                    errors.push(format!("tick {tick}: {op}/{phase} outside the cold zone"));
                }
            }
        }
        for h in f.get("hold").and_then(|h| h.as_array()).into_iter().flatten() {
            let id = h["droplet"].as_u64().unwrap();
            let want = h["zone"].as_str().unwrap();
            match ds.iter().find(|d| d.id == id) {
                Some(d) if zone_of(zones, d) == Some(want) => {}
                _ => errors.push(format!("tick {tick}: droplet {id} holds outside the {want} zone")),
            }
        }
        if k > 0 {
            let p = &frames[k - 1];
            if tick != p["tick"].as_u64().unwrap() + 1 {
                errors.push(format!("tick {tick}: not consecutive"));
            }
            for d in &ds {
                if let Some(q) = drops(p).iter().find(|q| q.id == d.id) {
                    if (d.col - q.col).abs() + (d.row - q.row).abs() > 1 || d.pads != q.pads {
                        errors.push(format!("tick {tick}: droplet {} jumps", d.id));
                    }
                }
            }
            if op != "inject" && (total(f) - total(p)).abs() > 1e-9 {
                errors.push(format!("tick {tick}: volume {} -> {}", total(p), total(f)));
            }
        }
    }
    if errors.is_empty() {
        Ok(stats)
    } else {
        Err(errors)
    }
}

// ---------------------------------------------------------------------------
// Predatorial networks expanded by hand, one level at a time.

fn cx(pairs: &[(u32, u32)]) -> Complex {
    Complex::from_pairs(pairs.iter().map(|&(s, m)| (SpeciesId(s), m)))
}

/// One predator level on top of `lower`, added by hand.
fn predator_level(n: &mut Network, lower: u32) -> u32 {
    let prey = n.add_species("prey").id;
    let pred = n.add_species("predator").id;
    n.set_initial(prey, 1.0).unwrap();
    n.set_initial(pred, 0.2).unwrap();
    let (p, q) = (prey.0, pred.0);
    n.add_reaction(cx(&[(p, 1)]), cx(&[(p, 2)]), RateLaw::MassAction(1.0)).unwrap();
    n.add_reaction(cx(&[(p, 1), (q, 1)]), cx(&[(q, 2)]), RateLaw::MassAction(1.0)).unwrap();
    n.add_reaction(cx(&[(lower, 1), (q, 1)]), cx(&[(q, 2)]), RateLaw::MassAction(0.5)).unwrap();
    n.add_reaction(cx(&[(q, 1)]), cx(&[]), RateLaw::MassAction(0.3)).unwrap();
    q
}

pub fn expanded_predatorial(depth: u32) -> Network {
    let mut n = Network::new();
    let prey = n.add_species("prey").id;
    n.set_initial(prey, 1.0).unwrap();
    n.add_reaction(cx(&[(prey.0, 1)]), cx(&[(prey.0, 2)]), RateLaw::MassAction(1.0)).unwrap();
    let mut top = prey.0;
    for _ in 0..depth {
        top = predator_level(&mut n, top);
    }
    n
}

// ---------------------------------------------------------------------------
// Protocol workloads: random mix/split DAGs over seeded samples, and samples
// carrying covariance from a short noisy run.

pub const SPECIES: u32 = 3;

pub fn species_ids() -> Vec<SpeciesId> {
    (0..SPECIES).map(SpeciesId).collect()
}

fn seeded(p: &mut Protocol, rng: &mut ChaCha8Rng, name: &str) -> SampleId {
    let v = rng.random_range(0.5..5.0);
    let t = CELSIUS_ZERO + rng.random_range(0.0..40.0);
    let id = p.new_sample(name, v, t).unwrap();
    for s in species_ids() {
        if rng.random_bool(0.8) {
            p.set_concentration(id, s, rng.random_range(0.0..2.0), "x").unwrap();
        }
    }
    id
}

fn moles(p: &Protocol, live: &[SampleId]) -> Vec<f64> {
    species_ids().iter().map(|s| live.iter().map(|id| p.sample(*id).unwrap().moles(*s)).sum()).collect()
}

/// Random mix/split DAG. Returns the relative change in per-species moles.
pub fn mix_split_dag(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut p = Protocol::new(ProtocolOptions::default());
    let mut live: Vec<SampleId> =
        (0..rng.random_range(2..6)).map(|i| seeded(&mut p, &mut rng, &format!("s{i}"))).collect();
    let before = moles(&p, &live);
    for _ in 0..rng.random_range(1..25) {
        if live.len() >= 2 && rng.random_bool(0.5) {
            let i = rng.random_range(0..live.len());
            let a = live.swap_remove(i);
            let j = rng.random_range(0..live.len());
            let b = live.swap_remove(j);
            let (ta, tb) = (p.sample(a).unwrap().temperature_k, p.sample(b).unwrap().temperature_k);
            let m = p.mix(a, b, "m").unwrap();
            let t = p.sample(m).unwrap().temperature_k;
            assert!(t >= ta.min(tb) - 1e-9 && t <= ta.max(tb) + 1e-9);
            live.push(m);
        } else {
            let i = rng.random_range(0..live.len());
            let s = live.swap_remove(i);
            let (x, y) = p.split(s, rng.random_range(0.05..0.95), ["l", "r"]).unwrap();
            live.extend([x, y]);
        }
    }
    let after = moles(&p, &live);
    before.iter().zip(&after).map(|(b, a)| if *b == 0.0 { a.abs() } else { ((a - b) / b).abs() }).fold(0.0, f64::max)
}

pub fn birth_death() -> Network {
    let mut n = Network::new();
    let x = n.add_species("X").id;
    let y = n.add_species("Y").id;
    let c = |s: SpeciesId| Complex::from_pairs([(s, 1)]);
    n.add_reaction(Complex::new(), c(x), RateLaw::MassAction(5.0)).unwrap();
    n.add_reaction(c(x), Complex::new(), RateLaw::MassAction(1.0)).unwrap();
    n.add_reaction(c(x), c(y), RateLaw::MassAction(0.5)).unwrap();
    n.add_reaction(c(y), Complex::new(), RateLaw::MassAction(0.2)).unwrap();
    n
}

/// A sample with non-trivial covariance from a short noisy run.
pub fn noisy(p: &mut Protocol, net: &Network, v: f64, t: f64, name: &str) -> SampleId {
    let id = p.new_sample(name, v, CELSIUS_ZERO + 20.0).unwrap();
    p.set_concentration(id, SpeciesId(0), 1.0, "X").unwrap();
    p.set_concentration(id, SpeciesId(1), 0.5, "Y").unwrap();
    let tol = Tolerances { points: 3, ..Tolerances::default() };
    let req = EquilibrateRequest { network: net, tolerances: &tol, probes: &[], label: name };
    p.equilibrate(id, t, CELSIUS_ZERO + 20.0, &req).unwrap();
    id
}

/// Mixes two noisy samples of volumes `va`, `vb` aged `ta`, `tb` and
/// returns the largest relative deviation of the mixed covariance from
/// (va² Ca + vb² Cb) / (va + vb)².
pub fn mix_covariance_error(va: f64, vb: f64, ta: f64, tb: f64) -> f64 {
    let net = birth_death();
    let mut p = Protocol::new(ProtocolOptions { lna: true, binomial_split: false });
    let a = noisy(&mut p, &net, va, ta, "a");
    let b = noisy(&mut p, &net, vb, tb, "b");
    let (sa, sb) = (p.sample(a).unwrap().clone(), p.sample(b).unwrap().clone());
    let m = p.mix(a, b, "m").unwrap();
    let sm = p.sample(m).unwrap();
    let (ca, cb, cm) = (sa.covariance.unwrap(), sb.covariance.unwrap(), sm.covariance.as_ref().unwrap());
    let mut worst = 0.0f64;
    for i in species_ids().into_iter().take(2) {
        for j in species_ids().into_iter().take(2) {
            let expected = (va * va * ca.get(i, j) + vb * vb * cb.get(i, j)) / (va + vb).powi(2);
            assert!(expected != 0.0);
            worst = worst.max(((cm.get(i, j) - expected) / expected).abs());
        }
    }
    worst
}

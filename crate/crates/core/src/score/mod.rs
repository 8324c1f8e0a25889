//! Reaction scores: species as horizontal lines, reactions as vertical
//! tiles with reagent, product and catalyst connectors.

mod dot;
mod svg;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{decompose_catalytic, Complex, Network, RateLaw, SpeciesId};

pub use dot::export_dot;
pub use svg::{render_svg, ScoreStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectorKind {
    Reagent,
    Product,
    Catalyst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connector {
    /// Index into [`ScoreModel::species`].
    pub line: usize,
    pub kind: ConnectorKind,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub reaction: usize,
    pub column: usize,
    pub connectors: Vec<Connector>,
    pub stem: bool,
}

impl Tile {
    fn has(&self, kind: ConnectorKind) -> bool {
        self.connectors.iter().any(|c| c.kind == kind)
    }

    /// No reagents at all: an inflow.
    pub fn is_source(&self) -> bool {
        !self.has(ConnectorKind::Reagent) && !self.has(ConnectorKind::Catalyst)
    }

    /// No products at all: an outflow.
    pub fn is_sink(&self) -> bool {
        !self.has(ConnectorKind::Product) && !self.has(ConnectorKind::Catalyst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    /// Line index to species.
    pub species: Vec<SpeciesId>,
    /// Display names, by line.
    pub names: Vec<String>,
    pub tiles: Vec<Tile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("species order is not a permutation of the network's species: {0}")]
    InvalidPermutation(String),
    #[error("tile {tile} has conflicting connectors on line {line}")]
    Integrity { tile: usize, line: usize },
    #[error("tile {tile} refers to line {line}, but the score has {lines} lines")]
    BadLine { tile: usize, line: usize, lines: usize },
    #[error("tile {tile} has no connectors")]
    EmptyTile { tile: usize },
}

/// How to order species lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpeciesOrder {
    Creation,
    Alpha,
    /// Lines reordered to bring species that share reactions together.
    Barycenter,
    Explicit(Vec<SpeciesId>),
}

/// Line order for `network` under `order`.
pub fn resolve_order(network: &Network, order: &SpeciesOrder) -> Vec<SpeciesId> {
    let mut ids: Vec<SpeciesId> = network.species.iter().map(|s| s.id).collect();
    match order {
        SpeciesOrder::Creation => {}
        SpeciesOrder::Alpha => ids.sort_by(|a, b| network.name(*a).cmp(network.name(*b)).then(a.cmp(b))),
        SpeciesOrder::Barycenter => ids = barycenter_order(network),
        SpeciesOrder::Explicit(v) => ids = v.clone(),
    }
    ids
}

/// A few sweeps of the barycenter heuristic over the species/reaction
/// incidence, starting from creation order.
pub fn barycenter_order(network: &Network) -> Vec<SpeciesId> {
    let n = network.species.len();
    let incidence: Vec<Vec<SpeciesId>> = network.reactions.iter().map(|r| r.referenced_species()).collect();
    let mut order: Vec<SpeciesId> = network.species.iter().map(|s| s.id).collect();
    for _ in 0..4 {
        let mut pos = vec![0.0; n];
        for (i, s) in order.iter().enumerate() {
            pos[s.index()] = i as f64;
        }
        let centers: Vec<f64> = incidence
            .iter()
            .map(|sp| sp.iter().map(|s| pos[s.index()]).sum::<f64>() / sp.len().max(1) as f64)
            .collect();
        let mut key = pos.clone();
        for (s, k) in key.iter_mut().enumerate() {
            let touching: Vec<f64> = incidence
                .iter()
                .zip(&centers)
                .filter(|(sp, _)| sp.contains(&SpeciesId(s as u32)))
                .map(|(_, c)| *c)
                .collect();
            if !touching.is_empty() {
                *k = touching.iter().sum::<f64>() / touching.len() as f64;
            }
        }
        let next = {
            let mut v = order.clone();
            v.sort_by(|a, b| key[a.index()].total_cmp(&key[b.index()]).then(pos[a.index()].total_cmp(&pos[b.index()])));
            v
        };
        if next == order {
            break;
        }
        order = next;
    }
    order
}

/// Lays out one tile per reaction, in network order.
pub fn layout_score(network: &Network, order: Option<&[SpeciesId]>) -> Result<ScoreModel, ScoreError> {
    let species: Vec<SpeciesId> = match order {
        None => network.species.iter().map(|s| s.id).collect(),
        Some(o) => {
            let mut seen = vec![false; network.species.len()];
            for s in o {
                match seen.get_mut(s.index()) {
                    Some(false) => seen[s.index()] = true,
                    Some(true) => {
                        return Err(ScoreError::InvalidPermutation(format!("{} appears twice", network.name(*s))))
                    }
                    None => return Err(ScoreError::InvalidPermutation(format!("unknown species {s}"))),
                }
            }
            if let Some(missing) = seen.iter().position(|x| !x) {
                return Err(ScoreError::InvalidPermutation(format!(
                    "{} is missing",
                    network.name(SpeciesId(missing as u32))
                )));
            }
            o.to_vec()
        }
    };
    let mut line_of = vec![0; network.species.len()];
    for (i, s) in species.iter().enumerate() {
        line_of[s.index()] = i;
    }
    let tiles = network
        .reactions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d = decompose_catalytic(r);
            let mut connectors = Vec::new();
            for (c, kind) in [
                (&d.net_reagents, ConnectorKind::Reagent),
                (&d.net_products, ConnectorKind::Product),
                (&d.catalysts, ConnectorKind::Catalyst),
            ] {
                connectors.extend(c.iter().map(|(s, m)| Connector { line: line_of[s.index()], kind, multiplicity: m }));
            }
            connectors.sort_by_key(|c| (c.line, c.kind));
            let single = |c: &Complex| c.support_len() == 1 && c.size() == 1;
            Tile { reaction: i, column: i, connectors, stem: !(single(&d.net_reagents) && single(&d.net_products)) }
        })
        .collect();
    let model = ScoreModel { names: species.iter().map(|s| network.name(*s).to_string()).collect(), species, tiles };
    check_model(&model)?;
    Ok(model)
}

/// Connector-kind disjointness: per tile and line, at most one connector
/// of each kind, and never both a reagent and a product.
pub fn check_model(model: &ScoreModel) -> Result<(), ScoreError> {
    let lines = model.species.len();
    for (t, tile) in model.tiles.iter().enumerate() {
        if tile.connectors.is_empty() {
            return Err(ScoreError::EmptyTile { tile: t });
        }
        let mut seen: BTreeMap<usize, [bool; 3]> = BTreeMap::new();
        for c in &tile.connectors {
            if c.line >= lines {
                return Err(ScoreError::BadLine { tile: t, line: c.line, lines });
            }
            let slot = seen.entry(c.line).or_default();
            let k = c.kind as usize;
            if slot[k] || c.multiplicity == 0 {
                return Err(ScoreError::Integrity { tile: t, line: c.line });
            }
            slot[k] = true;
            if slot[ConnectorKind::Reagent as usize] && slot[ConnectorKind::Product as usize] {
                return Err(ScoreError::Integrity { tile: t, line: c.line });
            }
        }
    }
    Ok(())
}

/// Rebuilds the network drawn by a score: reagents `C + A⁰` and products
/// `C + B⁰` per tile. Rates become unit mass-action placeholders and
/// species keep their original ids.
pub fn invert_score(model: &ScoreModel) -> Result<Network, ScoreError> {
    check_model(model)?;
    let mut by_id: Vec<(SpeciesId, &str)> =
        model.species.iter().copied().zip(model.names.iter().map(String::as_str)).collect();
    by_id.sort_by_key(|(id, _)| *id);
    if by_id.iter().enumerate().any(|(i, (id, _))| id.index() != i) {
        return Err(ScoreError::InvalidPermutation("species ids are not 0..n".into()));
    }
    let mut net = Network::new();
    for (_, name) in &by_id {
        net.add_species(name);
    }
    let mut tiles: Vec<&Tile> = model.tiles.iter().collect();
    tiles.sort_by_key(|t| t.reaction);
    for t in tiles {
        let mut reagents = Complex::new();
        let mut products = Complex::new();
        for c in &t.connectors {
            let s = model.species[c.line];
            match c.kind {
                ConnectorKind::Reagent => reagents.add(s, c.multiplicity),
                ConnectorKind::Product => products.add(s, c.multiplicity),
                ConnectorKind::Catalyst => {
                    reagents.add(s, c.multiplicity);
                    products.add(s, c.multiplicity);
                }
            }
        }
        net.add_reaction(reagents, products, RateLaw::MassAction(1.0)).expect("checked model yields valid reactions");
    }
    Ok(net)
}

//! Species, complexes, reactions and networks.
//!
//! A [`Network`] is the arena every other part of the crate works on: the
//! evaluator emits into it, the simulator reads it, and the score renderer
//! lays it out. Species identity is the [`SpeciesId`], never the name.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::RateExpr;

/// Index of a species inside its owning [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpeciesId(pub u32);

impl SpeciesId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SpeciesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub id: SpeciesId,
    pub base_name: String,
    pub display_name: String,
}

/// Multiset of species. Zero multiplicities are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Complex {
    entries: BTreeMap<SpeciesId, u32>,
}

impl Complex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (SpeciesId, u32)>>(pairs: I) -> Self {
        let mut c = Self::new();
        for (s, m) in pairs {
            c.add(s, m);
        }
        c
    }

    pub fn add(&mut self, species: SpeciesId, multiplicity: u32) {
        if multiplicity == 0 {
            return;
        }
        *self.entries.entry(species).or_insert(0) += multiplicity;
    }

    pub fn get(&self, species: SpeciesId) -> u32 {
        self.entries.get(&species).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct species.
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Sum of multiplicities.
    pub fn size(&self) -> u32 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpeciesId, u32)> + '_ {
        self.entries.iter().map(|(s, m)| (*s, *m))
    }

    pub fn species(&self) -> impl Iterator<Item = SpeciesId> + '_ {
        self.entries.keys().copied()
    }

    pub fn union_sum(&self, other: &Complex) -> Complex {
        let mut out = self.clone();
        for (s, m) in other.iter() {
            out.add(s, m);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateLaw {
    MassAction(f64),
    General(RateExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub reagents: Complex,
    pub products: Complex,
    pub rate: RateLaw,
}

impl Reaction {
    pub fn mass_action(reagents: Complex, products: Complex, k: f64) -> Self {
        Self { reagents, products, rate: RateLaw::MassAction(k) }
    }

    /// Every species the reaction touches, including those only read by a
    /// general rate expression.
    pub fn referenced_species(&self) -> Vec<SpeciesId> {
        let mut out: Vec<SpeciesId> = self.reagents.species().chain(self.products.species()).collect();
        if let RateLaw::General(e) = &self.rate {
            out.extend(e.species());
        }
        out.sort();
        out.dedup();
        out
    }
}

/// The `C, A⁰ → B⁰` form of a reaction: catalysts plus net reagents and
/// net products with disjoint supports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalyticDecomposition {
    pub catalysts: Complex,
    pub net_reagents: Complex,
    pub net_products: Complex,
}

pub fn decompose_catalytic(r: &Reaction) -> CatalyticDecomposition {
    let mut catalysts = Complex::new();
    let mut net_reagents = Complex::new();
    let mut net_products = Complex::new();
    for (s, n) in r.reagents.iter() {
        let m = r.products.get(s);
        let c = n.min(m);
        catalysts.add(s, c);
        net_reagents.add(s, n - c);
    }
    for (s, m) in r.products.iter() {
        let n = r.reagents.get(s);
        net_products.add(s, m - n.min(m));
    }
    CatalyticDecomposition { catalysts, net_reagents, net_products }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrnError {
    #[error("unknown species {0} (not part of this network)")]
    UnknownSpecies(SpeciesId),
    #[error("a reaction needs at least one reagent or product")]
    EmptyReaction,
    #[error("mass-action rate constant must be non-negative and finite, got {0}")]
    BadRateConstant(f64),
    #[error("initial concentration of {name} must be non-negative, got {value}")]
    NegativeConcentration { name: String, value: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    /// Initial concentrations in mol/L, as declared.
    pub initial: BTreeMap<SpeciesId, f64>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a fresh species. Equal base names yield distinct species;
    /// later ones are displayed as `name·1`, `name·2`, ...
    pub fn add_species(&mut self, base_name: &str) -> Species {
        let id = SpeciesId(self.species.len() as u32);
        let clashes = self.species.iter().filter(|s| s.base_name == base_name).count();
        let display_name = if clashes == 0 { base_name.to_string() } else { format!("{base_name}·{clashes}") };
        let sp = Species { id, base_name: base_name.to_string(), display_name };
        self.species.push(sp.clone());
        sp
    }

    pub fn contains(&self, id: SpeciesId) -> bool {
        id.index() < self.species.len()
    }

    pub fn species(&self, id: SpeciesId) -> Option<&Species> {
        self.species.get(id.index())
    }

    pub fn name(&self, id: SpeciesId) -> &str {
        self.species.get(id.index()).map(|s| s.display_name.as_str()).unwrap_or("?")
    }

    pub fn find(&self, display_name: &str) -> Option<SpeciesId> {
        self.species.iter().find(|s| s.display_name == display_name).map(|s| s.id)
    }

    pub fn set_initial(&mut self, id: SpeciesId, value: f64) -> Result<(), CrnError> {
        if !self.contains(id) {
            return Err(CrnError::UnknownSpecies(id));
        }
        if value.is_nan() || value < 0.0 {
            return Err(CrnError::NegativeConcentration { name: self.name(id).to_string(), value });
        }
        self.initial.insert(id, value);
        Ok(())
    }

    pub fn add_reaction(&mut self, reagents: Complex, products: Complex, rate: RateLaw) -> Result<usize, CrnError> {
        if reagents.is_empty() && products.is_empty() {
            return Err(CrnError::EmptyReaction);
        }
        let reaction = Reaction { reagents, products, rate };
        for s in reaction.referenced_species() {
            if !self.contains(s) {
                return Err(CrnError::UnknownSpecies(s));
            }
        }
        if let RateLaw::MassAction(k) = reaction.rate {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(CrnError::BadRateConstant(k));
            }
        }
        self.reactions.push(reaction);
        Ok(self.reactions.len() - 1)
    }

    /// Net change matrix, `species × reactions`.
    pub fn stoichiometry(&self) -> Vec<Vec<i64>> {
        let mut s = vec![vec![0i64; self.reactions.len()]; self.species.len()];
        for (j, r) in self.reactions.iter().enumerate() {
            for (sp, m) in r.products.iter() {
                s[sp.index()][j] += i64::from(m);
            }
            for (sp, m) in r.reagents.iter() {
                s[sp.index()][j] -= i64::from(m);
            }
        }
        s
    }

    /// Human-readable reaction, e.g. `2 A + B -> C`.
    pub fn format_reaction(&self, r: &Reaction) -> String {
        format!("{} -> {}", self.format_complex(&r.reagents), self.format_complex(&r.products))
    }

    pub fn format_complex(&self, c: &Complex) -> String {
        if c.is_empty() {
            return "∅".to_string();
        }
        c.iter()
            .map(|(s, m)| if m == 1 { self.name(s).to_string() } else { format!("{m} {}", self.name(s)) })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn net(names: &[&str]) -> (Network, Vec<SpeciesId>) {
        let mut n = Network::new();
        let ids = names.iter().map(|s| n.add_species(s).id).collect();
        (n, ids)
    }

    #[test]
    fn display_names_are_disambiguated() {
        let mut n = Network::new();
        assert_eq!(n.add_species("prey").display_name, "prey");
        assert_eq!(n.add_species("prey").display_name, "prey·1");
        assert_eq!(n.add_species("other").display_name, "other");
        assert_eq!(n.add_species("prey").display_name, "prey·2");
    }

    #[test]
    fn add_reaction_checks() {
        let (mut n, ids) = net(&["A", "B", "C"]);
        let r = n
            .add_reaction(
                Complex::from_pairs([(ids[0], 1), (ids[1], 1)]),
                Complex::from_pairs([(ids[2], 1)]),
                RateLaw::MassAction(1.0),
            )
            .unwrap();
        assert_eq!(r, 0);
        let influx = n.add_reaction(Complex::new(), Complex::from_pairs([(ids[2], 1)]), RateLaw::MassAction(2.0));
        assert_eq!(influx, Ok(1));
        assert_eq!(
            n.add_reaction(Complex::new(), Complex::new(), RateLaw::MassAction(1.0)),
            Err(CrnError::EmptyReaction)
        );
        let (other, _) = net(&["x", "y", "z", "w", "v"]);
        let foreign = other.species[4].id;
        assert_eq!(
            n.add_reaction(Complex::from_pairs([(foreign, 1)]), Complex::new(), RateLaw::MassAction(1.0)),
            Err(CrnError::UnknownSpecies(foreign))
        );
        assert!(matches!(
            n.add_reaction(Complex::from_pairs([(ids[0], 1)]), Complex::new(), RateLaw::MassAction(-1.0)),
            Err(CrnError::BadRateConstant(_))
        ));
    }

    #[test]
    fn decomposition_examples() {
        let (_, ids) = net(&["A", "B", "C"]);
        let (a, b, c) = (ids[0], ids[1], ids[2]);
        let r =
            Reaction::mass_action(Complex::from_pairs([(a, 2), (b, 1)]), Complex::from_pairs([(a, 1), (c, 1)]), 1.0);
        let d = decompose_catalytic(&r);
        assert_eq!(d.catalysts, Complex::from_pairs([(a, 1)]));
        assert_eq!(d.net_reagents, Complex::from_pairs([(a, 1), (b, 1)]));
        assert_eq!(d.net_products, Complex::from_pairs([(c, 1)]));

        let r = Reaction::mass_action(Complex::from_pairs([(a, 1)]), Complex::from_pairs([(b, 1)]), 1.0);
        let d = decompose_catalytic(&r);
        assert!(d.catalysts.is_empty());
        assert_eq!(d.net_reagents, Complex::from_pairs([(a, 1)]));
        assert_eq!(d.net_products, Complex::from_pairs([(b, 1)]));

        let r = Reaction::mass_action(
            Complex::from_pairs([(a, 1), (b, 1)]),
            Complex::from_pairs([(a, 1), (b, 1), (c, 1)]),
            1.0,
        );
        let d = decompose_catalytic(&r);
        assert_eq!(d.catalysts, Complex::from_pairs([(a, 1), (b, 1)]));
        assert!(d.net_reagents.is_empty());
        assert_eq!(d.net_products, Complex::from_pairs([(c, 1)]));
    }

    #[test]
    fn stoichiometry_examples() {
        let (mut n, ids) = net(&["A", "B"]);
        n.add_reaction(
            Complex::from_pairs([(ids[0], 1)]),
            Complex::from_pairs([(ids[1], 1)]),
            RateLaw::MassAction(1.0),
        )
        .unwrap();
        n.add_reaction(
            Complex::from_pairs([(ids[0], 2)]),
            Complex::from_pairs([(ids[0], 1)]),
            RateLaw::MassAction(1.0),
        )
        .unwrap();
        let s = n.stoichiometry();
        assert_eq!(s[0][0], -1);
        assert_eq!(s[1][0], 1);
        assert_eq!(s[0][1], -1);
        assert_eq!(s[1][1], 0);

        let (mut n, ids) = net(&["A", "B", "C"]);
        n.add_reaction(
            Complex::from_pairs([(ids[0], 1), (ids[1], 1)]),
            Complex::from_pairs([(ids[0], 1), (ids[1], 1), (ids[2], 1)]),
            RateLaw::MassAction(1.0),
        )
        .unwrap();
        let s = n.stoichiometry();
        assert_eq!((s[0][0], s[1][0], s[2][0]), (0, 0, 1));
    }

    fn arb_complex() -> impl Strategy<Value = Complex> {
        proptest::collection::vec((0u32..5, 0u32..=4), 0..5)
            .prop_map(|v| Complex::from_pairs(v.into_iter().map(|(s, m)| (SpeciesId(s), m))))
    }

    proptest! {
        #[test]
        fn decomposition_recomposes(reagents in arb_complex(), products in arb_complex()) {
            let r = Reaction::mass_action(reagents.clone(), products.clone(), 1.0);
            let d = decompose_catalytic(&r);
            prop_assert_eq!(d.catalysts.union_sum(&d.net_reagents), reagents);
            prop_assert_eq!(d.catalysts.union_sum(&d.net_products), products);
            for s in d.net_reagents.species() {
                prop_assert_eq!(d.net_products.get(s), 0);
            }
        }

        #[test]
        fn display_names_injective(names in proptest::collection::vec("[ab]{1,2}", 0..20)) {
            let mut n = Network::new();
            for name in &names {
                n.add_species(name);
            }
            let mut seen = std::collections::HashSet::new();
            for s in &n.species {
                prop_assert!(seen.insert(s.display_name.clone()));
            }
        }
    }
}

use crate::crn::{Network, RateLaw, Reaction, SpeciesId};
use crate::expr::{EvalEnv, RateExpr};

use super::integrate::OdeSystem;
use super::SimError;

/// Mass-action flux `k · Π x[s]^m` for reaction `r`, with concentrations
/// looked up by species id.
pub fn mass_action_flux(r: &Reaction, state: impl Fn(SpeciesId) -> f64) -> f64 {
    let k = match r.rate {
        RateLaw::MassAction(k) => k,
        RateLaw::General(_) => panic!("mass_action_flux called on a general rate law"),
    };
    r.reagents.iter().fold(k, |acc, (s, m)| acc * state(s).powi(m as i32))
}

/// Which part of the network to simulate and under which conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    /// State species, in output order.
    pub species: Vec<SpeciesId>,
    /// Indices into `network.reactions`.
    pub reactions: Vec<usize>,
    /// Kelvin.
    pub temperature: f64,
    /// System size: molecules per mol/L (volume in litres × Avogadro).
    pub omega: f64,
}

impl SystemSpec {
    /// Every species and reaction of the network.
    pub fn whole(network: &Network, omega: f64, temperature: f64) -> Self {
        Self {
            species: network.species.iter().map(|s| s.id).collect(),
            reactions: (0..network.reactions.len()).collect(),
            temperature,
            omega,
        }
    }
}

/// Where means and covariance entries live in the flat state vector.
/// Covariances are stored as the packed upper triangle, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub species: usize,
    pub lna: bool,
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        if self.lna {
            self.species + self.species * (self.species + 1) / 2
        } else {
            self.species
        }
    }

    /// Slot of `Cov(i, j)`; symmetric in its arguments.
    pub fn cov(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.species;
        n + i * n - i * (i + 1) / 2 + j
    }
}

#[derive(Debug, Clone)]
enum Kinetics {
    MassAction { k: f64, reagents: Vec<(usize, i32)> },
    General { expr: RateExpr, kinked: bool },
}

#[derive(Debug, Clone)]
struct Compiled {
    index: usize,
    net_change: Vec<(usize, f64)>,
    kinetics: Kinetics,
}

/// Right-hand side of the mean (and optionally covariance) ODE system.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub layout: StateLayout,
    pub species: Vec<SpeciesId>,
    names: Vec<String>,
    local: Vec<Option<usize>>,
    reactions: Vec<Compiled>,
    temperature: f64,
    omega: f64,
}

struct StateEnv<'a> {
    local: &'a [Option<usize>],
    x: &'a [f64],
    t: f64,
    temperature: f64,
}

impl EvalEnv for StateEnv<'_> {
    fn species(&self, id: SpeciesId) -> f64 {
        self.local.get(id.index()).copied().flatten().map_or(0.0, |i| self.x[i])
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn temperature(&self) -> f64 {
        self.temperature
    }
}

pub fn build_ode(network: &Network, spec: &SystemSpec, lna: bool) -> Result<VectorField, SimError> {
    let mut local = vec![None; network.species.len()];
    for (i, s) in spec.species.iter().enumerate() {
        if !network.contains(*s) {
            return Err(SimError::InvalidInput(format!("species {s} is not in the network")));
        }
        local[s.index()] = Some(i);
    }
    if lna && !(spec.omega > 0.0 && spec.omega.is_finite()) {
        return Err(SimError::InvalidInput(format!("system size must be positive, got {}", spec.omega)));
    }
    let mut reactions = Vec::with_capacity(spec.reactions.len());
    for &index in &spec.reactions {
        let r = network.reactions.get(index).ok_or_else(|| SimError::InvalidInput(format!("no reaction {index}")))?;
        let to_local = |s: SpeciesId| {
            local[s.index()].ok_or_else(|| {
                SimError::InvalidInput(format!(
                    "reaction {index} uses {} outside the simulated species",
                    network.name(s)
                ))
            })
        };
        let mut net_change = Vec::new();
        for s in r.reagents.species().chain(r.products.species()) {
            let delta = i64::from(r.products.get(s)) - i64::from(r.reagents.get(s));
            let li = to_local(s)?;
            if delta != 0 && !net_change.iter().any(|(j, _)| *j == li) {
                net_change.push((li, delta as f64));
            }
        }
        let kinetics = match &r.rate {
            RateLaw::MassAction(k) => Kinetics::MassAction {
                k: *k,
                reagents: r
                    .reagents
                    .iter()
                    .map(|(s, m)| Ok((to_local(s)?, m as i32)))
                    .collect::<Result<_, SimError>>()?,
            },
            RateLaw::General(e) => {
                for s in e.species() {
                    to_local(s)?;
                }
                Kinetics::General { kinked: e.has_state_kink(), expr: e.clone() }
            }
        };
        reactions.push(Compiled { index, net_change, kinetics });
    }
    Ok(VectorField {
        layout: StateLayout { species: spec.species.len(), lna },
        species: spec.species.clone(),
        names: spec.species.iter().map(|s| network.name(*s).to_string()).collect(),
        local,
        reactions,
        temperature: spec.temperature,
        omega: spec.omega,
    })
}

impl VectorField {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// True when every rate is mass action, so [`Self::flux_jacobian`] is
    /// exact rather than finite-difference.
    pub fn has_analytic_jacobian(&self) -> bool {
        self.reactions.iter().all(|r| matches!(r.kinetics, Kinetics::MassAction { .. }))
    }

    fn env<'a>(&'a self, t: f64, x: &'a [f64]) -> StateEnv<'a> {
        StateEnv { local: &self.local, x, t, temperature: self.temperature }
    }

    fn flux_of(&self, r: &Compiled, t: f64, x: &[f64]) -> f64 {
        match &r.kinetics {
            Kinetics::MassAction { k, reagents } => reagents.iter().fold(*k, |acc, &(i, m)| acc * x[i].powi(m)),
            Kinetics::General { expr, .. } => expr.eval(&self.env(t, x)),
        }
    }

    /// Reaction fluxes at concentrations `x` (means only).
    pub fn fluxes(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.reactions.iter().map(|r| self.flux_of(r, t, x)).collect()
    }

    /// `∂a/∂x` as a reactions × species row-major matrix. Mass-action rows
    /// are analytic; general rows use finite differences and fail when the
    /// one-sided slopes disagree at a kink.
    pub fn flux_jacobian(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, SimError> {
        let n = self.layout.species;
        let mut out = vec![0.0; self.reactions.len() * n];
        let mut probe = x[..n].to_vec();
        for (row, r) in self.reactions.iter().enumerate() {
            match &r.kinetics {
                Kinetics::MassAction { k, reagents } => {
                    for (pos, &(i, m)) in reagents.iter().enumerate() {
                        let mut d = *k * f64::from(m) * x[i].powi(m - 1);
                        for (other, &(j, mj)) in reagents.iter().enumerate() {
                            if other != pos {
                                d *= x[j].powi(mj);
                            }
                        }
                        out[row * n + i] += d;
                    }
                }
                Kinetics::General { expr, kinked } => {
                    for s in expr.species() {
                        let Some(i) = self.local[s.index()] else { continue };
                        let xi = x[i];
                        let h = 6e-6 * xi.abs().max(1e-6);
                        probe[i] = xi + h;
                        let up = expr.eval(&self.env(t, &probe));
                        let (slope, down) = if xi - h >= 0.0 {
                            probe[i] = xi - h;
                            let down = expr.eval(&self.env(t, &probe));
                            ((up - down) / (2.0 * h), Some(down))
                        } else {
                            probe[i] = xi;
                            ((up - expr.eval(&self.env(t, &probe))) / h, None)
                        };
                        if *kinked {
                            probe[i] = xi;
                            let mid = expr.eval(&self.env(t, &probe));
                            let fwd = (up - mid) / h;
                            let bwd = down.map(|d| (mid - d) / h).unwrap_or(fwd);
                            if (fwd - bwd).abs() > 1e-3 * (fwd.abs() + bwd.abs()) + 1e-9 {
                                return Err(SimError::NonDifferentiable {
                                    reaction: r.index,
                                    species: self.names[i].clone(),
                                    t,
                                });
                            }
                        }
                        probe[i] = xi;
                        out[row * n + i] = slope;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `J = S · ∂a/∂x`, species × species row-major.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, SimError> {
        let n = self.layout.species;
        let da = self.flux_jacobian(t, x)?;
        let mut j = vec![0.0; n * n];
        for (row, r) in self.reactions.iter().enumerate() {
            for &(i, s) in &r.net_change {
                for k in 0..n {
                    j[i * n + k] += s * da[row * n + k];
                }
            }
        }
        Ok(j)
    }

    pub fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        let n = self.layout.species;
        let x = &y[..n];
        let a = self.fluxes(t, x);
        dy.iter_mut().for_each(|v| *v = 0.0);
        for (r, flux) in self.reactions.iter().zip(&a) {
            for &(i, s) in &r.net_change {
                dy[i] += s * flux;
            }
        }
        if !self.layout.lna {
            return Ok(());
        }
        let j = self.jacobian(t, x)?;
        let lay = self.layout;
        let c = |i: usize, k: usize| y[lay.cov(i, k)];
        // diffusion term (1/Ω) S diag(a) Sᵀ, only over touched pairs
        for (r, flux) in self.reactions.iter().zip(&a) {
            for &(i, si) in &r.net_change {
                for &(k, sk) in &r.net_change {
                    if i <= k {
                        dy[lay.cov(i, k)] += si * sk * flux / self.omega;
                    }
                }
            }
        }
        for i in 0..n {
            for k in i..n {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += j[i * n + m] * c(m, k) + c(i, m) * j[k * n + m];
                }
                dy[lay.cov(i, k)] += acc;
            }
        }
        Ok(())
    }
}

impl OdeSystem for VectorField {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        self.eval(t, y, dy)
    }

    fn guarded(&self) -> usize {
        self.layout.species
    }

    fn component_name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_else(|| format!("state[{i}]"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crn::{Complex, Network};
    use crate::expr::Func;
    use rand::{Rng, SeedableRng};

    fn species(n: &mut Network, names: &[&str]) -> Vec<SpeciesId> {
        names.iter().map(|s| n.add_species(s).id).collect()
    }

    #[test]
    fn flux_examples() {
        let mut n = Network::new();
        let ids = species(&mut n, &["A", "B", "C", "X"]);
        let r = Reaction::mass_action(
            Complex::from_pairs([(ids[0], 1), (ids[1], 1)]),
            Complex::from_pairs([(ids[2], 1)]),
            1.0,
        );
        let conc = [2.0, 3.0, 0.0, 0.0];
        assert_eq!(mass_action_flux(&r, |s| conc[s.index()]), 6.0);
        let r = Reaction::mass_action(Complex::from_pairs([(ids[0], 2)]), Complex::new(), 0.5);
        let conc = [4.0, 0.0, 0.0, 0.0];
        assert_eq!(mass_action_flux(&r, |s| conc[s.index()]), 8.0);
        let r = Reaction::mass_action(Complex::new(), Complex::from_pairs([(ids[3], 1)]), 7.0);
        assert_eq!(mass_action_flux(&r, |_| 123.0), 7.0);
    }

    #[test]
    fn decay_and_catalysis_derivatives() {
        let mut n = Network::new();
        let ids = species(&mut n, &["A", "B", "C"]);
        n.add_reaction(
            Complex::from_pairs([(ids[0], 1)]),
            Complex::from_pairs([(ids[1], 1)]),
            RateLaw::MassAction(1.0),
        )
        .unwrap();
        let vf = build_ode(&n, &SystemSpec::whole(&n, 1.0, 293.15), false).unwrap();
        let mut dy = vec![0.0; 3];
        vf.eval(0.0, &[0.3, 0.1, 0.0], &mut dy).unwrap();
        assert_eq!(dy, vec![-0.3, 0.3, 0.0]);

        let mut n = Network::new();
        let ids = species(&mut n, &["A", "B", "C"]);
        n.add_reaction(
            Complex::from_pairs([(ids[0], 1), (ids[1], 1)]),
            Complex::from_pairs([(ids[0], 1), (ids[1], 1), (ids[2], 1)]),
            RateLaw::MassAction(2.0),
        )
        .unwrap();
        let vf = build_ode(&n, &SystemSpec::whole(&n, 1.0, 293.15), false).unwrap();
        vf.eval(0.0, &[1.5, 2.0, 0.0], &mut dy).unwrap();
        assert_eq!(dy, vec![0.0, 0.0, 6.0]);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut n = Network::new();
            let count = rng.random_range(1..=5);
            let ids: Vec<_> = (0..count).map(|i| n.add_species(&format!("s{i}")).id).collect();
            for _ in 0..rng.random_range(1..6) {
                let mut reag = Complex::new();
                let mut prod = Complex::new();
                for &s in &ids {
                    reag.add(s, rng.random_range(0..3));
                    prod.add(s, rng.random_range(0..3));
                }
                if reag.is_empty() && prod.is_empty() {
                    prod.add(ids[0], 1);
                }
                n.add_reaction(reag, prod, RateLaw::MassAction(rng.random_range(0.1..3.0))).unwrap();
            }
            let vf = build_ode(&n, &SystemSpec::whole(&n, 1.0, 300.0), false).unwrap();
            assert!(vf.has_analytic_jacobian());
            let x: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..2.0)).collect();
            let j = vf.jacobian(0.0, &x).unwrap();
            for k in 0..count {
                let h = 1e-6;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] += h;
                dn[k] -= h;
                let (mut fu, mut fd) = (vec![0.0; count], vec![0.0; count]);
                vf.eval(0.0, &up, &mut fu).unwrap();
                vf.eval(0.0, &dn, &mut fd).unwrap();
                for i in 0..count {
                    let numeric = (fu[i] - fd[i]) / (2.0 * h);
                    let exact = j[i * count + k];
                    assert!(
                        (numeric - exact).abs() <= 1e-5 * exact.abs().max(1.0),
                        "J[{i}][{k}] = {exact} vs {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn kinked_rate_is_rejected_under_lna() {
        let mut n = Network::new();
        let ids = species(&mut n, &["X"]);
        let rate = RateExpr::call(Func::Abs, vec![RateExpr::sub(RateExpr::Species(ids[0]), RateExpr::Const(1.0))]);
        n.add_reaction(Complex::new(), Complex::from_pairs([(ids[0], 1)]), RateLaw::General(rate)).unwrap();
        let vf = build_ode(&n, &SystemSpec::whole(&n, 100.0, 300.0), true).unwrap();
        let mut dy = vec![0.0; vf.layout.dim()];
        assert!(matches!(vf.eval(0.0, &[1.0, 0.0], &mut dy), Err(SimError::NonDifferentiable { .. })));
        assert!(vf.eval(0.0, &[2.0, 0.0], &mut dy).is_ok());
    }

    #[test]
    fn covariance_layout_is_packed_upper_triangle() {
        let lay = StateLayout { species: 3, lna: true };
        assert_eq!(lay.dim(), 9);
        let slots: Vec<usize> =
            [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)].iter().map(|&(i, j)| lay.cov(i, j)).collect();
        assert_eq!(slots, vec![3, 4, 5, 6, 7, 8]);
        assert_eq!(lay.cov(2, 1), lay.cov(1, 2));
    }
}

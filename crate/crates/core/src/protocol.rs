//! Liquid handling: samples, mixing, splitting, disposal and
//! equilibration, with concentration covariances carried along.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{Network, SpeciesId};
use crate::sim::{simulate, Probe, SimError, SystemSpec, Timecourse, Tolerances, AVOGADRO};

/// Absolute zero offset, K.
pub const CELSIUS_ZERO: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId(pub u32);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Symmetric concentration covariance over a sample's species, mol²/L².
/// Missing entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<(SpeciesId, SpeciesId, f64)>", from = "Vec<(SpeciesId, SpeciesId, f64)>")]
pub struct Covariance {
    entries: BTreeMap<(SpeciesId, SpeciesId), f64>,
}

fn ordered(i: SpeciesId, j: SpeciesId) -> (SpeciesId, SpeciesId) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl Covariance {
    pub fn get(&self, i: SpeciesId, j: SpeciesId) -> f64 {
        self.entries.get(&ordered(i, j)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: SpeciesId, j: SpeciesId, v: f64) {
        if v == 0.0 {
            self.entries.remove(&ordered(i, j));
        } else {
            self.entries.insert(ordered(i, j), v);
        }
    }

    /// Non-zero entries with `i <= j`.
    pub fn iter(&self) -> impl Iterator<Item = (SpeciesId, SpeciesId, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }
}

impl From<Covariance> for Vec<(SpeciesId, SpeciesId, f64)> {
    fn from(c: Covariance) -> Self {
        c.iter().collect()
    }
}

impl From<Vec<(SpeciesId, SpeciesId, f64)>> for Covariance {
    fn from(v: Vec<(SpeciesId, SpeciesId, f64)>) -> Self {
        let mut c = Covariance::default();
        for (i, j, x) in v {
            c.set(i, j, x);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub name: String,
    /// µL.
    pub volume_ul: f64,
    /// K.
    pub temperature_k: f64,
    /// mol/L, one entry per species present in the sample.
    pub concentrations: BTreeMap<SpeciesId, f64>,
    /// Present when the noise approximation is enabled.
    pub covariance: Option<Covariance>,
    pub consumed: bool,
}

impl Sample {
    /// System size `V·N_A`, molecules per mol/L.
    pub fn omega(&self) -> f64 {
        self.volume_ul * 1e-6 * AVOGADRO
    }

    /// Moles of `s` in the sample.
    pub fn moles(&self, s: SpeciesId) -> f64 {
        self.concentrations.get(&s).copied().unwrap_or(0.0) * self.volume_ul * 1e-6
    }
}

/// One liquid-handling operation, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProtocolStep {
    NewSample {
        sample: SampleId,
        name: String,
        volume_ul: f64,
        temperature_k: f64,
        /// The implicit top-level container, which never goes on a device.
        #[serde(default)]
        vessel: bool,
    },
    Mix {
        inputs: [SampleId; 2],
        output: SampleId,
        volume_ul: f64,
        temperature_k: f64,
    },
    Split {
        input: SampleId,
        outputs: [SampleId; 2],
        proportion: f64,
        volumes_ul: [f64; 2],
    },
    Dispose {
        input: SampleId,
    },
    Equilibrate {
        sample: SampleId,
        duration: f64,
        temperature_k: f64,
    },
}

impl ProtocolStep {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolStep::NewSample { .. } => "sample",
            ProtocolStep::Mix { .. } => "mix",
            ProtocolStep::Split { .. } => "split",
            ProtocolStep::Dispose { .. } => "dispose",
            ProtocolStep::Equilibrate { .. } => "equilibrate",
        }
    }

    /// Samples this step uses up.
    pub fn consumes(&self) -> Vec<SampleId> {
        match self {
            ProtocolStep::Mix { inputs, .. } => inputs.to_vec(),
            ProtocolStep::Split { input, .. } | ProtocolStep::Dispose { input } => vec![*input],
            _ => Vec::new(),
        }
    }

    /// Samples this step reads, consumed or not.
    pub fn reads(&self) -> Vec<SampleId> {
        match self {
            ProtocolStep::Equilibrate { sample, .. } => vec![*sample],
            other => other.consumes(),
        }
    }

    /// Samples this step brings into existence.
    pub fn creates(&self) -> Vec<SampleId> {
        match self {
            ProtocolStep::NewSample { sample, .. } => vec![*sample],
            ProtocolStep::Mix { output, .. } => vec![*output],
            ProtocolStep::Split { outputs, .. } => outputs.to_vec(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("sample volume must be positive and finite, got {0} µL")]
    InvalidVolume(f64),
    #[error("temperature must be positive and finite, got {0} K")]
    InvalidTemperature(f64),
    #[error("split proportion must lie strictly between 0 and 1, got {0}")]
    InvalidProportion(f64),
    #[error("equilibrate duration must be non-negative and finite, got {0}")]
    InvalidDuration(f64),
    #[error("concentration of {species} in sample '{sample}' must be non-negative, got {value}")]
    NegativeConcentration { sample: String, species: String, value: f64 },
    #[error("no sample {0}")]
    UnknownSample(SampleId),
    #[error("sample '{name}' was already consumed by step {step} ({op})")]
    Consumed { name: String, step: usize, op: &'static str },
    #[error("cannot mix sample '{0}' with itself")]
    SelfMix(String),
    #[error("step {step} ({op}) uses sample {sample} before it exists")]
    Undefined { step: usize, op: &'static str, sample: SampleId },
    #[error("step {step} ({op}) uses sample {sample}, already consumed by step {by}")]
    Reused { step: usize, op: &'static str, sample: SampleId, by: usize },
    #[error("in sample '{sample}': {source}")]
    Sim { sample: String, source: SimError },
}

/// Static linear-use check over a protocol log: every sample is created
/// before use and consumed at most once, and nothing reads it afterwards.
pub fn check_linear_use(log: &[ProtocolStep]) -> Result<(), ProtocolError> {
    let mut live = BTreeSet::new();
    let mut consumed_at: BTreeMap<SampleId, usize> = BTreeMap::new();
    for (step, s) in log.iter().enumerate() {
        for id in s.reads() {
            if let Some(&by) = consumed_at.get(&id) {
                return Err(ProtocolError::Reused { step, op: s.name(), sample: id, by });
            }
            if !live.contains(&id) {
                return Err(ProtocolError::Undefined { step, op: s.name(), sample: id });
            }
        }
        if let ProtocolStep::Mix { inputs: [a, b], .. } = s {
            if a == b {
                return Err(ProtocolError::Reused { step, op: s.name(), sample: *a, by: step });
            }
        }
        for id in s.consumes() {
            live.remove(&id);
            consumed_at.insert(id, step);
        }
        live.extend(s.creates());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProtocolOptions {
    /// Track concentration covariances alongside means.
    pub lna: bool,
    /// Add binomial partition noise on split.
    pub binomial_split: bool,
}

/// What an equilibration should simulate and report.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibrateRequest<'a> {
    pub network: &'a Network,
    pub tolerances: &'a Tolerances,
    pub probes: &'a [Probe],
    pub label: &'a str,
}

/// All samples of one execution plus the ordered log of operations.
#[derive(Debug, Clone, Default)]
pub struct Protocol {
    samples: Vec<Sample>,
    log: Vec<ProtocolStep>,
    consumed_by: Vec<Option<usize>>,
    options: ProtocolOptions,
}

fn check_volume(v: f64) -> Result<(), ProtocolError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ProtocolError::InvalidVolume(v))
    }
}

fn check_temperature(t: f64) -> Result<(), ProtocolError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ProtocolError::InvalidTemperature(t))
    }
}

impl Protocol {
    pub fn new(options: ProtocolOptions) -> Self {
        Self { options, ..Self::default() }
    }

    pub fn options(&self) -> ProtocolOptions {
        self.options
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn log(&self) -> &[ProtocolStep] {
        &self.log
    }

    pub fn into_parts(self) -> (Vec<Sample>, Vec<ProtocolStep>) {
        (self.samples, self.log)
    }

    pub fn sample(&self, id: SampleId) -> Result<&Sample, ProtocolError> {
        self.samples.get(id.0 as usize).ok_or(ProtocolError::UnknownSample(id))
    }

    fn live(&self, id: SampleId) -> Result<&Sample, ProtocolError> {
        let s = self.sample(id)?;
        match self.consumed_by[id.0 as usize] {
            Some(step) => Err(ProtocolError::Consumed { name: s.name.clone(), step, op: self.log[step].name() }),
            None => Ok(s),
        }
    }

    fn live_mut(&mut self, id: SampleId) -> Result<&mut Sample, ProtocolError> {
        self.live(id)?;
        Ok(&mut self.samples[id.0 as usize])
    }

    fn push_sample(&mut self, name: &str, volume_ul: f64, temperature_k: f64) -> SampleId {
        let id = SampleId(self.samples.len() as u32);
        self.samples.push(Sample {
            id,
            name: name.to_string(),
            volume_ul,
            temperature_k,
            concentrations: BTreeMap::new(),
            covariance: self.options.lna.then(Covariance::default),
            consumed: false,
        });
        self.consumed_by.push(None);
        id
    }

    fn consume(&mut self, id: SampleId) {
        self.samples[id.0 as usize].consumed = true;
        self.consumed_by[id.0 as usize] = Some(self.log.len());
    }

    /// An empty sample. Names are labels only; duplicates are allowed.
    pub fn new_sample(&mut self, name: &str, volume_ul: f64, temperature_k: f64) -> Result<SampleId, ProtocolError> {
        self.create(name, volume_ul, temperature_k, false)
    }

    /// Like [`Protocol::new_sample`], flagged as the off-device vessel.
    pub fn new_vessel(&mut self, name: &str, volume_ul: f64, temperature_k: f64) -> Result<SampleId, ProtocolError> {
        self.create(name, volume_ul, temperature_k, true)
    }

    fn create(
        &mut self,
        name: &str,
        volume_ul: f64,
        temperature_k: f64,
        vessel: bool,
    ) -> Result<SampleId, ProtocolError> {
        check_volume(volume_ul)?;
        check_temperature(temperature_k)?;
        let id = self.push_sample(name, volume_ul, temperature_k);
        self.log.push(ProtocolStep::NewSample { sample: id, name: name.to_string(), volume_ul, temperature_k, vessel });
        Ok(id)
    }

    /// Puts `species` into the sample at concentration `value` mol/L.
    pub fn set_concentration(
        &mut self,
        id: SampleId,
        species: SpeciesId,
        value: f64,
        name: &str,
    ) -> Result<(), ProtocolError> {
        let s = self.live_mut(id)?;
        if !(value >= 0.0 && value.is_finite()) {
            return Err(ProtocolError::NegativeConcentration {
                sample: s.name.clone(),
                species: name.to_string(),
                value,
            });
        }
        s.concentrations.insert(species, value);
        Ok(())
    }

    /// Combines two samples into a new one; both inputs are consumed.
    pub fn mix(&mut self, a: SampleId, b: SampleId, name: &str) -> Result<SampleId, ProtocolError> {
        let sa = self.live(a)?.clone();
        let sb = self.live(b)?.clone();
        if a == b {
            return Err(ProtocolError::SelfMix(sa.name));
        }
        let (va, vb) = (sa.volume_ul, sb.volume_ul);
        let v = va + vb;
        let temperature_k = (va * sa.temperature_k + vb * sb.temperature_k) / v;
        let id = self.push_sample(name, v, temperature_k);
        let (fa, fb) = (va / v, vb / v);
        let mut conc = BTreeMap::new();
        for s in sa.concentrations.keys().chain(sb.concentrations.keys()) {
            let ca = sa.concentrations.get(s).copied().unwrap_or(0.0);
            let cb = sb.concentrations.get(s).copied().unwrap_or(0.0);
            conc.insert(*s, fa * ca + fb * cb);
        }
        let out = &mut self.samples[id.0 as usize];
        out.concentrations = conc;
        if let Some(c) = out.covariance.as_mut() {
            let (wa, wb) = (fa * fa, fb * fb);
            for (cov, w) in [(&sa.covariance, wa), (&sb.covariance, wb)] {
                for (i, j, x) in cov.iter().flat_map(Covariance::iter) {
                    c.set(i, j, c.get(i, j) + w * x);
                }
            }
        }
        self.consume(a);
        self.consume(b);
        self.log.push(ProtocolStep::Mix { inputs: [a, b], output: id, volume_ul: v, temperature_k });
        Ok(id)
    }

    /// Divides a sample into fractions `p` and `1 - p` of its volume.
    pub fn split(&mut self, src: SampleId, p: f64, names: [&str; 2]) -> Result<(SampleId, SampleId), ProtocolError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ProtocolError::InvalidProportion(p));
        }
        let s = self.live(src)?.clone();
        let volumes = [p * s.volume_ul, (1.0 - p) * s.volume_ul];
        let mut ids = [SampleId(0); 2];
        for (k, (name, frac)) in names.iter().zip([p, 1.0 - p]).enumerate() {
            let id = self.push_sample(name, volumes[k], s.temperature_k);
            let out = &mut self.samples[id.0 as usize];
            out.concentrations = s.concentrations.clone();
            out.covariance = s.covariance.clone();
            if self.options.binomial_split {
                if let Some(c) = out.covariance.as_mut() {
                    let scale = (1.0 - frac) / (frac * s.omega());
                    for (&sp, &x) in &s.concentrations {
                        c.set(sp, sp, c.get(sp, sp) + scale * x);
                    }
                }
            }
            ids[k] = id;
        }
        self.consume(src);
        self.log.push(ProtocolStep::Split { input: src, outputs: ids, proportion: p, volumes_ul: volumes });
        Ok((ids[0], ids[1]))
    }

    pub fn dispose(&mut self, id: SampleId) -> Result<(), ProtocolError> {
        self.live(id)?;
        self.consume(id);
        self.log.push(ProtocolStep::Dispose { input: id });
        Ok(())
    }

    /// Logs an equilibration and sets the sample temperature without
    /// simulating anything.
    pub fn equilibrate_dry(&mut self, id: SampleId, duration: f64, temperature_k: f64) -> Result<(), ProtocolError> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(ProtocolError::InvalidDuration(duration));
        }
        check_temperature(temperature_k)?;
        self.live_mut(id)?.temperature_k = temperature_k;
        self.log.push(ProtocolStep::Equilibrate { sample: id, duration, temperature_k });
        Ok(())
    }

    /// Simulates the sample's slice of the network for `duration` seconds
    /// at `temperature_k` and writes the end state back into the sample.
    /// The slice holds every reaction whose species are all present.
    pub fn equilibrate(
        &mut self,
        id: SampleId,
        duration: f64,
        temperature_k: f64,
        req: &EquilibrateRequest<'_>,
    ) -> Result<Timecourse, ProtocolError> {
        self.equilibrate_dry(id, duration, temperature_k)?;
        let s = &self.samples[id.0 as usize];
        let species: Vec<SpeciesId> = s.concentrations.keys().copied().collect();
        let reactions: Vec<usize> = req
            .network
            .reactions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.referenced_species().iter().all(|x| s.concentrations.contains_key(x)))
            .map(|(i, _)| i)
            .collect();
        let spec = SystemSpec { species: species.clone(), reactions, temperature: temperature_k, omega: s.omega() };
        let names = species.iter().map(|x| req.network.name(*x).to_string()).collect();
        if duration == 0.0 {
            return Ok(Timecourse {
                label: req.label.to_string(),
                times: Vec::new(),
                species,
                names,
                means: Vec::new(),
                covariances: self.options.lna.then(Vec::new),
                observers: req
                    .probes
                    .iter()
                    .map(|p| crate::sim::ObserverSeries { label: p.label.clone(), values: Vec::new() })
                    .collect(),
                omega: spec.omega,
                temperature: temperature_k,
                warnings: Vec::new(),
            });
        }
        let means: Vec<f64> = species.iter().map(|x| s.concentrations[x]).collect();
        let packed: Option<Vec<f64>> = s.covariance.as_ref().map(|c| {
            let n = species.len();
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in i..n {
                    out.push(c.get(species[i], species[j]));
                }
            }
            out
        });
        let tc = simulate(
            req.network,
            &spec,
            &means,
            packed.as_deref(),
            duration,
            req.tolerances,
            self.options.lna,
            req.probes,
            req.label,
        )
        .map_err(|source| ProtocolError::Sim { sample: s.name.clone(), source })?;

        let s = &mut self.samples[id.0 as usize];
        if let Some(last) = tc.means.last() {
            for (x, v) in species.iter().zip(last) {
                s.concentrations.insert(*x, v.max(0.0));
            }
        }
        if let (Some(c), Some(all)) = (s.covariance.as_mut(), tc.covariances.as_ref()) {
            if let Some(last) = all.last() {
                let n = species.len();
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        c.set(species[i], species[j], last[k]);
                        k += 1;
                    }
                }
            }
        }
        Ok(tc)
    }
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{Complex, CrnError, Network, RateLaw, Species, SpeciesId};
use crate::protocol::{EquilibrateRequest, Protocol, ProtocolError, ProtocolOptions, ProtocolStep, Sample, SampleId};
use crate::sim::{Observer, Probe, SimError, Timecourse, Tolerances};

use super::value::Dataset;
use super::EvalConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmitError {
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("more than {0} reactions emitted; raise the limit if this is intended")]
    TooManyReactions(usize),
    #[error("no simulation run {index} to capture ({available} completed so far)")]
    NoSuchRun { index: usize, available: usize },
}

/// A named dataset written out by `export`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Export {
    pub name: String,
    pub dataset: Dataset,
}

/// Everything a program produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub network: Network,
    pub reports: Vec<Probe>,
    /// One per executed `equilibrate`, in order.
    pub runs: Vec<Timecourse>,
    /// Final state of every sample, including consumed ones.
    pub samples: Vec<Sample>,
    pub protocol: Vec<ProtocolStep>,
    pub exports: Vec<Export>,
    pub warnings: Vec<String>,
}

impl ExecutionTrace {
    /// Samples that were never consumed, except the implicit vessel.
    pub fn leftover_samples(&self) -> Vec<&Sample> {
        let vessel = self.protocol.iter().find_map(|s| match s {
            ProtocolStep::NewSample { sample, vessel: true, .. } => Some(*sample),
            _ => None,
        });
        self.samples.iter().filter(|s| !s.consumed && Some(s.id) != vessel).collect()
    }
}

/// Captures a completed run as a dataset.
pub fn capture_timecourse(trace: &ExecutionTrace, index: usize) -> Result<Dataset, EmitError> {
    trace
        .runs
        .get(index)
        .map(Dataset::from_timecourse)
        .ok_or(EmitError::NoSuchRun { index, available: trace.runs.len() })
}

/// The side outputs of evaluation: network, reports, samples and runs.
#[derive(Debug, Clone)]
pub struct EmissionContext {
    pub network: Network,
    pub current_sample: SampleId,
    pub reports: Vec<Probe>,
    pub protocol: Protocol,
    pub runs: Vec<Timecourse>,
    pub exports: Vec<Export>,
    pub warnings: Vec<String>,
    lna: bool,
    dry: bool,
    tolerances: Tolerances,
    max_reactions: usize,
}

impl EmissionContext {
    /// Fresh context whose current sample is the implicit vessel.
    pub fn new(config: &EvalConfig) -> Result<Self, EmitError> {
        let mut protocol = Protocol::new(ProtocolOptions { lna: config.lna, binomial_split: config.binomial_split });
        let vessel = protocol.new_vessel("vessel", config.vessel_volume_ul, config.vessel_temperature_k)?;
        Ok(Self {
            network: Network::new(),
            current_sample: vessel,
            reports: Vec::new(),
            protocol,
            runs: Vec::new(),
            exports: Vec::new(),
            warnings: Vec::new(),
            lna: config.lna,
            dry: config.check_only,
            tolerances: config.tolerances.clone(),
            max_reactions: config.max_reactions,
        })
    }

    /// New species named after `base_name`, placed in the current sample.
    pub fn fresh_species(&mut self, base_name: &str, initial: f64) -> Result<Species, EmitError> {
        self.fresh_species_in(base_name, initial, self.current_sample)
    }

    pub fn fresh_species_in(&mut self, base_name: &str, initial: f64, sample: SampleId) -> Result<Species, EmitError> {
        if !(initial >= 0.0 && initial.is_finite()) {
            return Err(CrnError::NegativeConcentration { name: base_name.to_string(), value: initial }.into());
        }
        self.protocol.sample(sample)?;
        let sp = self.network.add_species(base_name);
        self.network.set_initial(sp.id, initial)?;
        self.protocol.set_concentration(sample, sp.id, initial, &sp.display_name)?;
        Ok(sp)
    }

    pub fn set_amount(&mut self, species: SpeciesId, value: f64, sample: SampleId) -> Result<(), EmitError> {
        if !self.network.contains(species) {
            return Err(CrnError::UnknownSpecies(species).into());
        }
        let name = self.network.name(species).to_string();
        self.protocol.set_concentration(sample, species, value, &name)?;
        Ok(())
    }

    pub fn emit_reaction(&mut self, reagents: Complex, products: Complex, rate: RateLaw) -> Result<usize, EmitError> {
        if self.network.reactions.len() >= self.max_reactions {
            return Err(EmitError::TooManyReactions(self.max_reactions));
        }
        Ok(self.network.add_reaction(reagents, products, rate)?)
    }

    /// Appends a report; every later equilibration evaluates it.
    pub fn emit_report(&mut self, observer: Observer, label: String) -> Result<(), EmitError> {
        let species: Vec<SpeciesId> = match &observer {
            Observer::Value(e) => e.species(),
            Observer::Var(a) | Observer::Sd(a) | Observer::Cv(a) | Observer::Fano(a) => {
                a.coeffs.keys().copied().collect()
            }
            Observer::Cov(a, b) => a.coeffs.keys().chain(b.coeffs.keys()).copied().collect(),
        };
        if let Some(s) = species.into_iter().find(|s| !self.network.contains(*s)) {
            return Err(CrnError::UnknownSpecies(s).into());
        }
        if !self.lna && !self.dry {
            if let Some(stat) = observer.needs_lna() {
                return Err(SimError::NeedsLna { stat }.into());
            }
        }
        self.reports.push(Probe { label, observer });
        Ok(())
    }

    /// Runs (or, in check mode, only logs) an equilibration and returns
    /// the run index.
    pub fn equilibrate(&mut self, sample: SampleId, duration: f64, temperature_k: f64) -> Result<usize, EmitError> {
        let label = format!("run{}", self.runs.len() + 1);
        let tc = if self.dry {
            self.protocol.equilibrate_dry(sample, duration, temperature_k)?;
            Timecourse {
                label,
                times: Vec::new(),
                species: Vec::new(),
                names: Vec::new(),
                means: Vec::new(),
                covariances: None,
                observers: Vec::new(),
                omega: 0.0,
                temperature: temperature_k,
                warnings: Vec::new(),
            }
        } else {
            let req = EquilibrateRequest {
                network: &self.network,
                tolerances: &self.tolerances,
                probes: &self.reports,
                label: &label,
            };
            self.protocol.equilibrate(sample, duration, temperature_k, &req)?
        };
        self.warnings.extend(tc.warnings.iter().map(|w| format!("{}: {w}", tc.label)));
        self.runs.push(tc);
        Ok(self.runs.len() - 1)
    }

    pub fn capture(&self, index: usize) -> Result<Dataset, EmitError> {
        self.runs
            .get(index)
            .map(Dataset::from_timecourse)
            .ok_or(EmitError::NoSuchRun { index, available: self.runs.len() })
    }

    pub fn into_trace(self) -> ExecutionTrace {
        let (samples, protocol) = self.protocol.into_parts();
        ExecutionTrace {
            network: self.network,
            reports: self.reports,
            runs: self.runs,
            samples,
            protocol,
            exports: self.exports,
            warnings: self.warnings,
        }
    }
}

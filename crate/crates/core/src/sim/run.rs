//! One complete simulation: build, integrate, observe, check.

use serde::{Deserialize, Serialize};

use crate::crn::{Network, RateLaw};

use super::field::{build_ode, SystemSpec, VectorField};
use super::integrate::{integrate, OdeSystem, Tolerances};
use super::observe::{observe, psd_violation, Observer, ObserverSeries, Timecourse};
use super::SimError;

/// Tolerance for the post-hoc covariance PSD check.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Integrates `Ω·C` instead of `C`, so covariance entries sit on the
/// concentration scale and share the solver's absolute tolerance.
struct Scaled<'a> {
    field: &'a VectorField,
    n: usize,
    omega: f64,
}

impl OdeSystem for Scaled<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        let mut real = y.to_vec();
        real[self.n..].iter_mut().for_each(|v| *v /= self.omega);
        self.field.rhs(t, &real, dy)?;
        dy[self.n..].iter_mut().for_each(|v| *v *= self.omega);
        Ok(())
    }

    fn guarded(&self) -> usize {
        self.field.guarded()
    }

    fn component_name(&self, i: usize) -> String {
        self.field.component_name(i)
    }
}

/// A labelled observer to evaluate on the run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub observer: Observer,
}

/// Integrates the subsystem `spec` of `network` from `t = 0` to `t_end`.
///
/// `means` holds initial concentrations in `spec.species` order; `cov`,
/// when given, the packed upper-triangle initial covariance. With `lna`
/// and no `cov` the covariance starts at zero. Time breakpoints of the
/// rate expressions are added to the solver's event list.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    network: &Network,
    spec: &SystemSpec,
    means: &[f64],
    cov: Option<&[f64]>,
    t_end: f64,
    tol: &Tolerances,
    lna: bool,
    probes: &[Probe],
    label: &str,
) -> Result<Timecourse, SimError> {
    let n = spec.species.len();
    if means.len() != n {
        return Err(SimError::InvalidInput(format!("expected {n} initial values, got {}", means.len())));
    }
    if !lna {
        if let Some(stat) = probes.iter().find_map(|p| p.observer.needs_lna()) {
            return Err(SimError::NeedsLna { stat });
        }
    }
    let vf = build_ode(network, spec, lna)?;
    let mut y0 = means.to_vec();
    if lna {
        let packed = n * (n + 1) / 2;
        match cov {
            Some(c) if c.len() == packed => y0.extend(c.iter().map(|v| v * spec.omega)),
            Some(c) => {
                return Err(SimError::InvalidInput(format!("expected {packed} covariance entries, got {}", c.len())))
            }
            None => y0.extend(std::iter::repeat_n(0.0, packed)),
        }
    }
    let mut tol = tol.clone();
    for &r in &spec.reactions {
        if let RateLaw::General(e) = &network.reactions[r].rate {
            tol.events.extend(e.time_breakpoints().into_iter().filter(|t| *t > 0.0 && *t < t_end));
        }
    }
    tol.events.sort_by(f64::total_cmp);
    tol.events.dedup();

    let sol = if lna {
        integrate(&Scaled { field: &vf, n, omega: spec.omega }, &y0, t_end, &tol)?
    } else {
        integrate(&vf, &y0, t_end, &tol)?
    };
    let mut tc = Timecourse {
        label: label.to_string(),
        times: sol.times,
        species: spec.species.clone(),
        names: vf.names().to_vec(),
        means: sol.states.iter().map(|s| s[..n].to_vec()).collect(),
        covariances: lna.then(|| sol.states.iter().map(|s| s[n..].iter().map(|v| v / spec.omega).collect()).collect()),
        observers: Vec::new(),
        omega: spec.omega,
        temperature: spec.temperature,
        warnings: Vec::new(),
    };
    tc.observers = probes
        .iter()
        .map(|p| observe(&tc, &p.observer).map(|values| ObserverSeries { label: p.label.clone(), values }))
        .collect::<Result<_, _>>()?;
    if lna {
        if let Some((k, min)) = (0..tc.len()).find_map(|k| psd_violation(&tc, k, PSD_TOLERANCE).map(|m| (k, m))) {
            tc.warnings.push(format!(
                "covariance matrix is not positive semidefinite at t={} (smallest eigenvalue {min:e})",
                tc.times[k]
            ));
        }
    }
    Ok(tc)
}

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::crn::SpeciesId;
use crate::expr::{EvalEnv, RateExpr};

use super::field::StateLayout;
use super::SimError;

/// `Σ aᵢ·xᵢ + offset` over species concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCombination {
    pub coeffs: BTreeMap<SpeciesId, f64>,
    pub offset: f64,
}

impl LinearCombination {
    pub fn from_expr(e: &RateExpr) -> Option<Self> {
        e.linear_form().map(|(coeffs, offset)| Self { coeffs, offset })
    }

    pub fn species(id: SpeciesId) -> Self {
        Self { coeffs: BTreeMap::from([(id, 1.0)]), offset: 0.0 }
    }
}

/// What a `report` displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observer {
    /// Any expression evaluated on the mean trajectory.
    Value(RateExpr),
    Var(LinearCombination),
    Sd(LinearCombination),
    /// Coefficient of variation, `sd/mean`.
    Cv(LinearCombination),
    /// Variance over mean on the molecule-count scale.
    Fano(LinearCombination),
    Cov(LinearCombination, LinearCombination),
}

impl Observer {
    pub fn needs_lna(&self) -> Option<&'static str> {
        match self {
            Observer::Value(_) => None,
            Observer::Var(_) => Some("var"),
            Observer::Sd(_) => Some("sd"),
            Observer::Cv(_) => Some("cv"),
            Observer::Fano(_) => Some("fano"),
            Observer::Cov(..) => Some("cov"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSeries {
    pub label: String,
    pub values: Vec<f64>,
}

/// Sampled result of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timecourse {
    pub label: String,
    pub times: Vec<f64>,
    pub species: Vec<SpeciesId>,
    pub names: Vec<String>,
    /// `means[k][i]`: concentration of species `i` at `times[k]`, mol/L.
    pub means: Vec<Vec<f64>>,
    /// Packed upper-triangle covariances per time point, when LNA ran.
    pub covariances: Option<Vec<Vec<f64>>>,
    pub observers: Vec<ObserverSeries>,
    pub omega: f64,
    pub temperature: f64,
    pub warnings: Vec<String>,
}

impl Timecourse {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn layout(&self) -> StateLayout {
        StateLayout { species: self.species.len(), lna: true }
    }

    pub fn index_of(&self, id: SpeciesId) -> Option<usize> {
        self.species.iter().position(|s| *s == id)
    }

    /// `Cov(i, j)` at time index `k`.
    pub fn cov(&self, k: usize, i: usize, j: usize) -> Option<f64> {
        let lay = self.layout();
        self.covariances.as_ref().map(|c| c[k][lay.cov(i, j) - lay.species])
    }

    /// Full covariance matrix at time index `k`.
    pub fn cov_matrix(&self, k: usize) -> Option<Vec<Vec<f64>>> {
        let n = self.species.len();
        self.covariances.as_ref()?;
        Some((0..n).map(|i| (0..n).map(|j| self.cov(k, i, j).unwrap_or(0.0)).collect()).collect())
    }

    pub fn series(&self, label: &str) -> Option<&[f64]> {
        self.observers.iter().find(|o| o.label == label).map(|o| o.values.as_slice())
    }

    pub fn mean_series(&self, id: SpeciesId) -> Option<Vec<f64>> {
        let i = self.index_of(id)?;
        Some(self.means.iter().map(|m| m[i]).collect())
    }
}

struct PointEnv<'a> {
    tc: &'a Timecourse,
    k: usize,
}

impl EvalEnv for PointEnv<'_> {
    fn species(&self, id: SpeciesId) -> f64 {
        self.tc.index_of(id).map_or(0.0, |i| self.tc.means[self.k][i])
    }
    fn time(&self) -> f64 {
        self.tc.times[self.k]
    }
    fn temperature(&self) -> f64 {
        self.tc.temperature
    }
}

fn lin_mean(tc: &Timecourse, k: usize, a: &LinearCombination) -> f64 {
    a.offset + a.coeffs.iter().map(|(s, c)| c * tc.index_of(*s).map_or(0.0, |i| tc.means[k][i])).sum::<f64>()
}

fn lin_cov(tc: &Timecourse, k: usize, a: &LinearCombination, b: &LinearCombination) -> f64 {
    let mut acc = 0.0;
    for (sa, ca) in &a.coeffs {
        let Some(i) = tc.index_of(*sa) else { continue };
        for (sb, cb) in &b.coeffs {
            let Some(j) = tc.index_of(*sb) else { continue };
            acc += ca * cb * tc.cov(k, i, j).unwrap_or(0.0);
        }
    }
    acc
}

/// Evaluates an observer at every time point of a timecourse.
pub fn observe(tc: &Timecourse, obs: &Observer) -> Result<Vec<f64>, SimError> {
    if let Some(stat) = obs.needs_lna() {
        if tc.covariances.is_none() {
            return Err(SimError::NeedsLna { stat });
        }
    }
    let series = (0..tc.len())
        .map(|k| match obs {
            Observer::Value(e) => e.eval(&PointEnv { tc, k }),
            Observer::Var(a) => lin_cov(tc, k, a, a),
            Observer::Sd(a) => lin_cov(tc, k, a, a).max(0.0).sqrt(),
            Observer::Cv(a) => {
                let m = lin_mean(tc, k, a);
                if m == 0.0 {
                    f64::NAN
                } else {
                    lin_cov(tc, k, a, a).max(0.0).sqrt() / m
                }
            }
            Observer::Fano(a) => {
                let m = lin_mean(tc, k, a);
                if m == 0.0 {
                    f64::NAN
                } else {
                    tc.omega * lin_cov(tc, k, a, a) / m
                }
            }
            Observer::Cov(a, b) => lin_cov(tc, k, a, b),
        })
        .collect();
    Ok(series)
}

/// Most negative eigenvalue of the covariance at time index `k` if it is
/// below `-tol` (the matrix is not positive semidefinite).
pub fn psd_violation(tc: &Timecourse, k: usize, tol: f64) -> Option<f64> {
    let m = tc.cov_matrix(k)?;
    let n = m.len();
    if n == 0 {
        return None;
    }
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let min = mat.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    (min < -tol).then_some(min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tc_two_species() -> Timecourse {
        // species A, B; cov = [[0.5, 0.1], [0.1, 0.2]]
        Timecourse {
            label: "t".into(),
            times: vec![0.0, 1.0],
            species: vec![SpeciesId(0), SpeciesId(1)],
            names: vec!["A".into(), "B".into()],
            means: vec![vec![2.0, 1.0], vec![0.0, 1.0]],
            covariances: Some(vec![vec![0.5, 0.1, 0.2], vec![0.5, 0.1, 0.2]]),
            observers: vec![],
            omega: 10.0,
            temperature: 300.0,
            warnings: vec![],
        }
    }

    fn lin(pairs: &[(u32, f64)]) -> LinearCombination {
        LinearCombination { coeffs: pairs.iter().map(|&(s, c)| (SpeciesId(s), c)).collect(), offset: 0.0 }
    }

    #[test]
    fn variance_is_bilinear() {
        let tc = tc_two_species();
        let v = observe(&tc, &Observer::Var(lin(&[(0, 2.0)]))).unwrap();
        assert_eq!(v[0], 4.0 * 0.5);
        let v = observe(&tc, &Observer::Var(lin(&[(0, 1.0), (1, 1.0)]))).unwrap();
        assert!((v[0] - (0.5 + 0.2 + 2.0 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_combination_has_zero_variance() {
        let tc = tc_two_species();
        let e = RateExpr::sub(RateExpr::Species(SpeciesId(0)), RateExpr::Species(SpeciesId(0)));
        let a = LinearCombination::from_expr(&e).unwrap();
        let v = observe(&tc, &Observer::Var(a)).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn cv_and_fano() {
        let tc = tc_two_species();
        let cv = observe(&tc, &Observer::Cv(lin(&[(0, 1.0)]))).unwrap();
        assert!((cv[0] - 0.5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(cv[1].is_nan());
        let fano = observe(&tc, &Observer::Fano(lin(&[(1, 1.0)]))).unwrap();
        assert!((fano[0] - 10.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn statistics_need_lna() {
        let mut tc = tc_two_species();
        tc.covariances = None;
        assert_eq!(observe(&tc, &Observer::Sd(lin(&[(0, 1.0)]))), Err(SimError::NeedsLna { stat: "sd" }));
        assert!(observe(&tc, &Observer::Value(RateExpr::Species(SpeciesId(0)))).is_ok());
    }

    #[test]
    fn psd_check() {
        let mut tc = tc_two_species();
        assert_eq!(psd_violation(&tc, 0, 1e-9), None);
        tc.covariances = Some(vec![vec![0.1, 1.0, 0.1], vec![0.1, 1.0, 0.1]]);
        assert!(psd_violation(&tc, 0, 1e-9).unwrap() < 0.0);
    }
}

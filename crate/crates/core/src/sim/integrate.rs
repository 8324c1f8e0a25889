//! Adaptive Dormand–Prince 5(4) integrator with dense output.

use super::{SimError, DEFAULT_ATOL, DEFAULT_POINTS, DEFAULT_RTOL};

/// An ODE right-hand side.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError>;
    /// Number of leading components that must stay non-negative.
    fn guarded(&self) -> usize {
        0
    }
    fn component_name(&self, i: usize) -> String {
        format!("y[{i}]")
    }
}

/// Adapter for plain closures.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Output grid size, including both end points.
    pub points: usize,
    /// Times where the right-hand side may be discontinuous; steps never
    /// straddle them.
    pub events: Vec<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL, points: DEFAULT_POINTS, events: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Solution {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order minus embedded 4th-order weights
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Integrates `sys` from `t = 0` to `t_end`, sampling the dense output on
/// an evenly spaced grid of `tol.points` times (both ends included).
pub fn integrate(sys: &dyn OdeSystem, y0: &[f64], t_end: f64, tol: &Tolerances) -> Result<Solution, SimError> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(SimError::InvalidInput(format!("initial state has {} entries, system has {n}", y0.len())));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::InvalidInput(format!("end time must be positive, got {t_end}")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::InvalidInput("initial state is not finite".into()));
    }
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(SimError::InvalidInput("tolerances must be positive".into()));
    }
    let points = tol.points.max(2);
    let grid: Vec<f64> =
        (0..points).map(|i| if i + 1 == points { t_end } else { t_end * i as f64 / (points - 1) as f64 }).collect();
    let mut stops: Vec<f64> = tol.events.iter().copied().filter(|&e| e > 0.0 && e < t_end).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let guarded = sys.guarded().min(n);
    let dt_min = 1e-14 * t_end;
    let mut out = Solution {
        times: Vec::with_capacity(points),
        states: Vec::with_capacity(points),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    out.times.push(0.0);
    out.states.push(y0.to_vec());
    let mut next_out = 1;

    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    sys.rhs(t, &y, &mut k[0])?;
    check_finite(&k[0], t, &y)?;
    let mut h = initial_step(&y, &k[0], t_end, tol);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stop_idx = 0;

    while t < t_end {
        let stop = stops[stop_idx];
        let mut hit_stop = false;
        if t + h >= stop || stop - (t + h) < dt_min {
            h = stop - t;
            hit_stop = true;
        }
        if h < dt_min && !hit_stop {
            return Err(stiffness(sys, t, h, &y, &k[0], tol.atol));
        }

        let mut stage_ok = true;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += h * a * k[j][i];
                }
                stage[i] = acc;
            }
            if let Err(e) = sys.rhs(t + C[s] * h, &stage, &mut k[s]) {
                if matches!(e, SimError::NonDifferentiable { .. }) {
                    return Err(e);
                }
                stage_ok = false;
                break;
            }
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }

        let err = if stage_ok { error_norm(&k, &y, &y_new, h, tol) } else { f64::NAN };
        if !err.is_finite() {
            out.rejected_steps += 1;
            h *= 0.25;
            if h < dt_min {
                return Err(SimError::NonFinite { t, last_good: y });
            }
            continue;
        }
        let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR);
        if err > 1.0 {
            out.rejected_steps += 1;
            h *= factor.min(1.0);
            continue;
        }

        // negative-concentration guard on the leading components
        if let Some(i) = (0..guarded).find(|&i| y_new[i] < -tol.atol) {
            out.rejected_steps += 1;
            h *= 0.5;
            if h < dt_min {
                return Err(SimError::Negative { t, species: sys.component_name(i) });
            }
            continue;
        }
        let mut clamped = false;
        for v in y_new.iter_mut().take(guarded) {
            if *v < 0.0 {
                *v = 0.0;
                clamped = true;
            }
        }

        let t_new = if hit_stop { stop } else { t + h };
        // dense output on grid points inside (t, t_new]
        while next_out < points && grid[next_out] <= t_new {
            let theta = ((grid[next_out] - t) / h).clamp(0.0, 1.0);
            let yi = if grid[next_out] == t_new { y_new.clone() } else { dense(&k, &y, &y_new, h, theta) };
            out.times.push(grid[next_out]);
            out.states.push(yi);
            next_out += 1;
        }

        out.accepted_steps += 1;
        t = t_new;
        std::mem::swap(&mut y, &mut y_new);
        if hit_stop || clamped {
            sys.rhs(t, &y, &mut k[0])?;
        } else {
            let last = k[6].clone();
            k[0] = last;
        }
        check_finite(&k[0], t, &y)?;
        if hit_stop {
            stop_idx += 1;
            if stop_idx >= stops.len() {
                break;
            }
        }
        h = if hit_stop { h.max(dt_min * 10.0) } else { h * factor };
    }
    Ok(out)
}

fn check_finite(dy: &[f64], t: f64, y: &[f64]) -> Result<(), SimError> {
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SimError::NonFinite { t, last_good: y.to_vec() })
    }
}

fn error_norm(k: &[Vec<f64>], y: &[f64], y_new: &[f64], h: f64, tol: &Tolerances) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
        let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / scale).powi(2);
    }
    (sum / n as f64).sqrt()
}

fn dense(k: &[Vec<f64>], y: &[f64], y_new: &[f64], h: f64, theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    (0..y.len())
        .map(|i| {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            let c3 = ydiff - h * k[6][i] - bspl;
            let c4 = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            y[i] + theta * (ydiff + theta1 * (bspl + theta * (c3 + theta1 * c4)))
        })
        .collect()
}

fn initial_step(y: &[f64], f: &[f64], t_end: f64, tol: &Tolerances) -> f64 {
    let scale = |v: f64| tol.atol + tol.rtol * v.abs();
    let n = y.len().max(1) as f64;
    let d0 = (y.iter().map(|v| (v / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (y.iter().zip(f).map(|(v, d)| (d / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * t_end.max(1e-6) } else { 0.01 * d0 / d1 };
    h.min(t_end)
}

fn stiffness(sys: &dyn OdeSystem, t: f64, dt: f64, y: &[f64], f: &[f64], atol: f64) -> SimError {
    let guarded = sys.guarded();
    let range = if guarded > 0 { guarded } else { y.len() };
    let fastest = (0..range)
        .max_by(|&a, &b| {
            let ra = f[a].abs() / (y[a].abs() + atol);
            let rb = f[b].abs() / (y[b].abs() + atol);
            ra.total_cmp(&rb)
        })
        .map(|i| sys.component_name(i))
        .unwrap_or_default();
    SimError::Stiff { t, dt, species: fastest }
}

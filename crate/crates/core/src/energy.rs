//! Idle energy functions: the contract used by the schedulers, a concave
//! piecewise-linear representation and concavity checks.

use crate::baseline::TransitionGraph;
use crate::{Error, Result};

/// Absolute tolerance on second differences (energy units).
pub const CONCAVITY_TOL: f64 = 1e-9;

/// Maps an idle period length to the energy consumed during it.
///
/// Implementations must satisfy `energy(0) == 0` and be non-decreasing; the
/// exact scheduler additionally needs concavity, which it verifies.
pub trait IdleEnergyFunction {
    /// Energy for an idle period of length `delta >= 0`.
    fn energy(&self, delta: f64) -> f64;

    /// Largest `delta` the function is meant to be queried with, if bounded.
    fn domain_max(&self) -> Option<f64> {
        None
    }

    /// Checked evaluation.
    fn eval(&self, delta: f64) -> Result<f64> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::NegativeDuration(delta));
        }
        Ok(self.energy(delta))
    }
}

impl<F: IdleEnergyFunction + ?Sized> IdleEnergyFunction for &F {
    fn energy(&self, delta: f64) -> f64 {
        (**self).energy(delta)
    }
    fn domain_max(&self) -> Option<f64> {
        (**self).domain_max()
    }
}

impl<F: IdleEnergyFunction + ?Sized> IdleEnergyFunction for Box<F> {
    fn energy(&self, delta: f64) -> f64 {
        (**self).energy(delta)
    }
    fn domain_max(&self) -> Option<f64> {
        (**self).domain_max()
    }
}

/// `f(delta) = power * delta`: a machine that simply stays on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub power: f64,
}

impl Linear {
    pub fn new(power: f64) -> Self {
        Linear { power }
    }

    pub fn identity() -> Self {
        Linear { power: 1.0 }
    }
}

impl IdleEnergyFunction for Linear {
    fn energy(&self, delta: f64) -> f64 {
        self.power * delta
    }
}

/// Adapter turning a closure into an idle energy function.
pub struct FnEnergy<F>(pub F);

impl<F: Fn(f64) -> f64> IdleEnergyFunction for FnEnergy<F> {
    fn energy(&self, delta: f64) -> f64 {
        (self.0)(delta)
    }
}

/// Non-decreasing concave piecewise-linear function through `(0, 0)`.
///
/// Between breakpoints the value is interpolated linearly; past the last
/// breakpoint the final segment is extended.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearConcave {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinearConcave {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidArgument("need at least two breakpoints".into()));
        }
        if breakpoints[0] != (0.0, 0.0) {
            return Err(Error::InvalidArgument("first breakpoint must be (0, 0)".into()));
        }
        if breakpoints.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidArgument("breakpoints must be finite".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = breakpoints.into_iter().unzip();
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("breakpoint deltas must be strictly increasing".into()));
        }
        if let Some(at) = chord_violation(&xs, &ys) {
            return Err(Error::NonConcaveFunction { at });
        }
        Ok(PiecewiseLinearConcave { xs, ys })
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Slope of the last segment, used for extrapolation.
    pub fn tail_slope(&self) -> f64 {
        let n = self.xs.len();
        (self.ys[n - 1] - self.ys[n - 2]) / (self.xs[n - 1] - self.xs[n - 2])
    }

    /// Slope of the first segment.
    pub fn initial_slope(&self) -> f64 {
        self.ys[1] / self.xs[1]
    }
}

impl IdleEnergyFunction for PiecewiseLinearConcave {
    fn energy(&self, delta: f64) -> f64 {
        let n = self.xs.len();
        // index of the first breakpoint strictly greater than delta
        let k = self.xs.partition_point(|&x| x <= delta);
        if k == 0 {
            return 0.0;
        }
        if self.xs[k - 1] == delta {
            return self.ys[k - 1];
        }
        let (a, b) = if k == n { (n - 2, n - 1) } else { (k - 1, k) };
        let slope = (self.ys[b] - self.ys[a]) / (self.xs[b] - self.xs[a]);
        self.ys[a] + slope * (delta - self.xs[a])
    }
}

/// Returns the location of the first failure of concavity or monotonicity
/// over sorted sample points, judged through consecutive chord slopes.
fn chord_violation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None; // (slope, length)
    for k in 0..xs.len().saturating_sub(1) {
        let len = xs[k + 1] - xs[k];
        let slope = (ys[k + 1] - ys[k]) / len;
        if slope * len < -CONCAVITY_TOL {
            return Some(xs[k]);
        }
        if let Some((ps, plen)) = prev {
            if (slope - ps) * len.min(plen) > CONCAVITY_TOL {
                return Some(xs[k]);
            }
        }
        prev = Some((slope, len));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConcavityVerdict {
    Ok,
    /// Second difference exceeds the tolerance around `at`.
    NotConcave {
        at: f64,
    },
    /// The function decreases between `at` and the next grid point.
    Decreasing {
        at: f64,
    },
}

impl ConcavityVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ConcavityVerdict::Ok)
    }
}

/// Samples `f` on `0, h, 2h, ..` up to `delta_max` and checks second
/// differences `f(x-h) + f(x+h) - 2 f(x) <= tol` and first differences
/// `>= -tol`. Reports the first violation.
pub fn check_concavity<F: IdleEnergyFunction + ?Sized>(f: &F, grid_step: f64, delta_max: f64) -> ConcavityVerdict {
    assert!(grid_step > 0.0, "grid step must be positive");
    let m = (delta_max / grid_step).ceil().max(1.0) as usize;
    let mut prev2 = f.energy(0.0);
    let mut prev1 = f.energy(grid_step);
    if prev1 - prev2 < -CONCAVITY_TOL {
        return ConcavityVerdict::Decreasing { at: 0.0 };
    }
    for k in 2..=m {
        let x = k as f64 * grid_step;
        let cur = f.energy(x);
        let mid = (k - 1) as f64 * grid_step;
        if cur - prev1 < -CONCAVITY_TOL {
            return ConcavityVerdict::Decreasing { at: mid };
        }
        if prev2 + cur - 2.0 * prev1 > CONCAVITY_TOL {
            return ConcavityVerdict::NotConcave { at: mid };
        }
        prev2 = prev1;
        prev1 = cur;
    }
    ConcavityVerdict::Ok
}

/// Concavity check restricted to arbitrary sample points (sorted and
/// de-duplicated internally), using chord slopes.
pub fn check_concavity_on<F: IdleEnergyFunction + ?Sized>(f: &F, points: &[f64]) -> ConcavityVerdict {
    let mut xs: Vec<f64> = points.iter().copied().filter(|x| *x >= 0.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let ys: Vec<f64> = xs.iter().map(|&x| f.energy(x)).collect();
    for k in 0..xs.len().saturating_sub(1) {
        if ys[k + 1] - ys[k] < -CONCAVITY_TOL {
            return ConcavityVerdict::Decreasing { at: xs[k] };
        }
    }
    match chord_violation(&xs, &ys) {
        Some(at) => ConcavityVerdict::NotConcave { at },
        None => ConcavityVerdict::Ok,
    }
}

/// The gap-pricing function of a transition graph as a concave
/// piecewise-linear function.
///
/// Staying on costs `P_on * delta`; a standby excursion becomes available once
/// `delta` covers its cool-down plus heat-up time. Breakpoints sit on every
/// availability threshold and crossing of the candidate lines. Fails with
/// [`Error::NonConcaveInduced`] when the pointwise minimum jumps down at a
/// threshold or otherwise loses concavity; such graphs remain usable by the
/// time-indexed baseline.
pub fn from_transition_graph(g: &TransitionGraph) -> Result<PiecewiseLinearConcave> {
    let p_on = g.processing_power();
    // (threshold, value at threshold, slope); the on-line starts at 0.
    let mut lines = vec![(0.0, 0.0, p_on)];
    for ex in g.excursions() {
        lines.push((ex.threshold, ex.fixed_energy, ex.hold_power));
    }
    let value = |l: &(f64, f64, f64), x: f64| l.1 + l.2 * (x - l.0);

    let mut xs = vec![0.0];
    for (i, a) in lines.iter().enumerate() {
        xs.push(a.0);
        for b in &lines[i + 1..] {
            if a.2 != b.2 {
                // a.1 + a.2 (x - a.0) = b.1 + b.2 (x - b.0)
                let x = (b.1 - b.2 * b.0 - a.1 + a.2 * a.0) / (a.2 - b.2);
                if x.is_finite() && x >= a.0.max(b.0) {
                    xs.push(x);
                }
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let last = *xs.last().unwrap();
    xs.push(if last > 0.0 { 2.0 * last } else { 1.0 });

    for l in &lines[1..] {
        let t = l.0;
        let left = lines.iter().filter(|o| o.0 < t).map(|o| value(o, t)).fold(f64::INFINITY, f64::min);
        let at = g.gap_cost(t);
        if left > at + crate::energy::CONCAVITY_TOL {
            return Err(Error::NonConcaveInduced { at: t });
        }
    }

    let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, g.gap_cost(x))).collect();
    PiecewiseLinearConcave::new(pts).map_err(|e| match e {
        Error::NonConcaveFunction { at } => Error::NonConcaveInduced { at },
        other => other,
    })
}

//! Bilinear furnace model `x' = -alpha x + beta u - rho x u`, where `x` is the
//! furnace temperature above ambient and `u in [0, u_max]` the heating power.
//!
//! Time is in minutes, power in kW and energy in kW·min (divide by 60 for
//! kWh). Under piecewise-constant power the state is computed with the exact
//! per-segment solution, carrying the exit state of one segment into the next.

use nalgebra::{DMatrix, DVector};

use crate::energy::{IdleEnergyFunction, PiecewiseLinearConcave};
use crate::{Error, Result};

/// Idle energy within this distance of the full-reheat bound is treated as
/// saturated by [`BilinearFurnaceModel::tabulate`].
pub const SATURATION_TOL: f64 = 1e-6;

const MAX_BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearFurnaceModel {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub u_max: f64,
    /// Operating temperature above ambient.
    pub x0: f64,
    /// Ambient temperature in °C.
    pub ambient: f64,
}

impl Default for BilinearFurnaceModel {
    fn default() -> Self {
        Self::case_study()
    }
}

impl BilinearFurnaceModel {
    pub const CASE_ALPHA: f64 = 0.003821964;
    pub const CASE_BETA: f64 = 0.175187494;
    pub const CASE_RHO: f64 = 0.000094367;
    pub const CASE_U_MAX: f64 = 160.0;
    pub const CASE_OPERATING: f64 = 960.0;
    pub const CASE_AMBIENT: f64 = 35.0;

    /// Checks positivity of all parameters. Admissibility is checked by the
    /// operations that need it.
    pub fn new(alpha: f64, beta: f64, rho: f64, u_max: f64, x0: f64, ambient: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("rho", rho), ("u_max", u_max), ("x0", x0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !ambient.is_finite() {
            return Err(Error::InvalidArgument("ambient must be finite".into()));
        }
        Ok(BilinearFurnaceModel { alpha, beta, rho, u_max, x0, ambient })
    }

    /// The identified vacuum furnace: 960 °C operating, 35 °C ambient, 160 kW.
    pub fn case_study() -> Self {
        BilinearFurnaceModel {
            alpha: Self::CASE_ALPHA,
            beta: Self::CASE_BETA,
            rho: Self::CASE_RHO,
            u_max: Self::CASE_U_MAX,
            x0: Self::CASE_OPERATING - Self::CASE_AMBIENT,
            ambient: Self::CASE_AMBIENT,
        }
    }

    pub fn with_operating_temperature(mut self, celsius: f64) -> Result<Self> {
        let x0 = celsius - self.ambient;
        if !(x0 > 0.0) {
            return Err(Error::OutOfRange(format!("operating temperature {celsius} must exceed ambient")));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn operating_temperature(&self) -> f64 {
        self.ambient + self.x0
    }

    /// `(beta - rho x0) u_max - alpha x0`; must be positive.
    pub fn admissibility_margin(&self) -> f64 {
        (self.beta - self.rho * self.x0) * self.u_max - self.alpha * self.x0
    }

    pub fn check_admissible(&self) -> Result<()> {
        let margin = self.admissibility_margin();
        if margin > 0.0 {
            Ok(())
        } else {
            Err(Error::NotAdmissible(format!("(beta - rho x0) u_max - alpha x0 = {margin} is not positive")))
        }
    }

    /// Decay rate `alpha + rho u` of a constant-power segment.
    #[inline]
    pub fn rate(&self, u: f64) -> f64 {
        self.alpha + self.rho * u
    }

    /// State approached under constant power `u`.
    #[inline]
    pub fn equilibrium(&self, u: f64) -> f64 {
        self.beta * u / self.rate(u)
    }

    /// State after holding power `u` for `t` starting from `x_start`.
    #[inline]
    pub fn segment_state(&self, x_start: f64, u: f64, t: f64) -> f64 {
        let eq = self.equilibrium(u);
        (-self.rate(u) * t).exp() * (x_start - eq) + eq
    }

    /// Constant power holding deviation `x` as an equilibrium.
    pub fn trim_power(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::OutOfRange(format!("deviation {x} must be non-negative")));
        }
        let denom = self.beta - self.rho * x;
        if denom <= 0.0 {
            return Err(Error::OutOfRange(format!("beta - rho x = {denom} is not positive at x = {x}")));
        }
        Ok(self.alpha * x / denom)
    }

    /// Time to cool from `from` to `to` with the power off.
    pub fn cool_down_time(&self, from: f64, to: f64) -> Result<f64> {
        if !(to > 0.0 && to <= from) {
            return Err(Error::OutOfRange(format!("cannot cool from {from} to {to}")));
        }
        Ok((from / to).ln() / self.alpha)
    }

    /// Time to heat from `from` to `to` at full power.
    pub fn heat_up_time(&self, from: f64, to: f64) -> Result<f64> {
        let eq = self.equilibrium(self.u_max);
        if !(from <= to && to < eq) {
            return Err(Error::OutOfRange(format!("cannot heat from {from} to {to} (full-power equilibrium {eq})")));
        }
        Ok(((eq - from) / (eq - to)).ln() / self.rate(self.u_max))
    }

    /// Heating time from ambient to operating temperature at full power.
    pub fn full_reheat_time(&self) -> Result<f64> {
        self.check_admissible()?;
        self.heat_up_time(0.0, self.x0)
    }

    /// Energy of a full reheat from ambient: the supremum of the idle energy.
    pub fn full_reheat_energy(&self) -> Result<f64> {
        Ok(self.u_max * self.full_reheat_time()?)
    }

    /// Final state of the bang-bang control with switching time `t_sw` over
    /// an idle period of `t_f`, minus `x0`. Decreasing in `t_sw`.
    pub fn switching_residual(&self, t_f: f64, t_sw: f64) -> f64 {
        let after_cooling = self.x0 * (-self.alpha * t_sw).exp();
        self.segment_state(after_cooling, self.u_max, t_f - t_sw) - self.x0
    }

    /// Switching time of the energy-optimal control for an idle period `t_f`.
    ///
    /// Bisection on `[0, t_f]`, run until the bracket collapses to adjacent
    /// floating-point values (at most 200 halvings).
    pub fn switching_time(&self, t_f: f64) -> Result<f64> {
        self.check_admissible()?;
        if t_f.is_nan() || t_f < 0.0 {
            return Err(Error::NegativeDuration(t_f));
        }
        if t_f == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0_f64, t_f);
        let (mut g_lo, mut g_hi) = (self.switching_residual(t_f, lo), self.switching_residual(t_f, hi));
        for _ in 0..MAX_BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.switching_residual(t_f, mid);
            if g == 0.0 {
                return Ok(mid);
            }
            if g > 0.0 {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
                g_hi = g;
            }
        }
        Ok(if g_lo.abs() <= g_hi.abs() { lo } else { hi })
    }

    /// `d t_sw / d t_f` expressed through the switching time itself.
    pub fn switching_time_derivative(&self, t_sw: f64) -> f64 {
        let growth = (self.alpha * t_sw).exp();
        1.0 + self.alpha * self.x0 / ((self.rho * self.x0 - self.beta * growth) * self.u_max)
    }

    /// Minimum energy to spend an idle period of `t_f` and be back at the
    /// operating temperature: `u_max (t_f - t_sw(t_f))`.
    pub fn idle_energy(&self, t_f: f64) -> Result<f64> {
        let t_sw = self.switching_time(t_f)?;
        Ok(self.u_max * (t_f - t_sw))
    }

    /// Power off until `t_sw`, full power afterwards.
    pub fn bang_bang_segments(&self, t_f: f64) -> Result<Vec<ControlSegment>> {
        let t_sw = self.switching_time(t_f)?;
        Ok(vec![ControlSegment::new(t_sw, 0.0), ControlSegment::new(t_f - t_sw, self.u_max)])
    }

    /// Simulates piecewise-constant power from `x_init`, sampling every
    /// `sample_step` and at every segment boundary.
    pub fn simulate(&self, x_init: f64, segments: &[ControlSegment], sample_step: f64) -> Result<Trajectory> {
        if !(sample_step > 0.0) {
            return Err(Error::InvalidArgument("sample step must be positive".into()));
        }
        if x_init.is_nan() || x_init < 0.0 {
            return Err(Error::OutOfRange(format!("initial deviation {x_init} must be non-negative")));
        }
        for s in segments {
            if !(s.duration >= 0.0) || !(0.0..=self.u_max).contains(&s.power) {
                return Err(Error::OutOfRange(format!("invalid control segment {s:?}")));
            }
        }
        let segments: Vec<ControlSegment> = segments.iter().copied().filter(|s| s.duration > 0.0).collect();
        let total: f64 = segments.iter().map(|s| s.duration).sum();

        let mut times = Vec::new();
        let steps = (total / sample_step).floor() as usize;
        times.extend((0..=steps).map(|k| k as f64 * sample_step));
        let mut acc = 0.0;
        for s in &segments {
            acc += s.duration;
            times.push(acc);
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * total.max(1.0));

        let mut points = Vec::with_capacity(times.len());
        let mut seg = 0;
        let mut seg_start = 0.0;
        let mut x_seg = x_init;
        let mut energy_seg = 0.0;
        for &t in &times {
            while seg < segments.len() && t >= seg_start + segments[seg].duration && seg + 1 < segments.len() {
                x_seg = self.segment_state(x_seg, segments[seg].power, segments[seg].duration);
                energy_seg += segments[seg].power * segments[seg].duration;
                seg_start += segments[seg].duration;
                seg += 1;
            }
            let (x, power, energy) = match segments.get(seg) {
                Some(s) => {
                    let dt = (t - seg_start).min(s.duration);
                    (self.segment_state(x_seg, s.power, dt), s.power, energy_seg + s.power * dt)
                }
                None => (x_init, 0.0, 0.0),
            };
            points.push(TrajectoryPoint { time: t, x, power, energy });
        }
        Ok(Trajectory { points, energy: segments.iter().map(|s| s.power * s.duration).sum() })
    }

    /// The bang-bang trajectory for an idle period of length `t_f`.
    pub fn simulate_idle_period(&self, t_f: f64, sample_step: f64) -> Result<Trajectory> {
        let segments = self.bang_bang_segments(t_f)?;
        self.simulate(self.x0, &segments, sample_step)
    }

    /// Tabulates the idle energy on `0, step, .., ceil(t_f_max / step) step`.
    ///
    /// Once the energy is within [`SATURATION_TOL`] of the full-reheat bound the
    /// table stops; a final segment, no steeper than the previous one and
    /// capped at the bound, covers the rest of the range.
    pub fn tabulate(&self, t_f_max: f64, step: f64) -> Result<PiecewiseLinearConcave> {
        if !(step > 0.0) || !(t_f_max >= step) {
            return Err(Error::InvalidArgument("require step > 0 and t_f_max >= step".into()));
        }
        let bound = self.full_reheat_energy()?;
        let m = (t_f_max / step).ceil() as usize;
        let mut points = Vec::with_capacity(m + 1);
        points.push((0.0, 0.0));
        for k in 1..=m {
            let x = k as f64 * step;
            let e = self.idle_energy(x)?;
            points.push((x, e));
            if bound - e <= SATURATION_TOL {
                if k < m {
                    // close the table without exceeding the bound or the last slope
                    let (px, py) = points[points.len() - 2];
                    let slope = (e - py) / (x - px);
                    let end = m as f64 * step;
                    points.push((end, bound.min(e + slope * (end - x))));
                }
                break;
            }
        }
        PiecewiseLinearConcave::new(points)
    }

    /// The exact (untabulated) idle energy function.
    pub fn energy_function(&self) -> Result<FurnaceEnergy> {
        self.check_admissible()?;
        Ok(FurnaceEnergy { model: *self })
    }
}

/// Idle energy evaluated directly from the model, one root solve per call.
#[derive(Debug, Clone, Copy)]
pub struct FurnaceEnergy {
    model: BilinearFurnaceModel,
}

impl FurnaceEnergy {
    pub fn model(&self) -> &BilinearFurnaceModel {
        &self.model
    }
}

impl IdleEnergyFunction for FurnaceEnergy {
    fn energy(&self, delta: f64) -> f64 {
        // admissibility was checked on construction
        self.model.idle_energy(delta).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSegment {
    pub duration: f64,
    pub power: f64,
}

impl ControlSegment {
    pub fn new(duration: f64, power: f64) -> Self {
        ControlSegment { duration, power }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    /// Deviation from ambient.
    pub x: f64,
    /// Power applied from this instant on.
    pub power: f64,
    /// Energy consumed up to this instant.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub energy: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> f64 {
        self.points.last().map(|p| p.x).unwrap_or(f64::NAN)
    }
}

/// One row of a measurement series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub time: f64,
    /// Temperature in °C.
    pub temperature: f64,
    /// Power applied from this sample until the next one.
    pub power: f64,
}

/// Turns a simulated trajectory into measurements in °C.
pub fn trajectory_to_measurements(model: &BilinearFurnaceModel, trajectory: &Trajectory) -> Vec<Measurement> {
    trajectory
        .points
        .iter()
        .map(|p| Measurement { time: p.time, temperature: p.x + model.ambient, power: p.power })
        .collect()
}

/// A regression sample: state, its time derivative and the applied power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeSample {
    pub x: f64,
    pub x_dot: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedParameters {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

impl FittedParameters {
    /// Attaches the fitted dynamics to the input bound and operating point of `base`.
    pub fn into_model(self, base: &BilinearFurnaceModel) -> BilinearFurnaceModel {
        BilinearFurnaceModel { alpha: self.alpha, beta: self.beta, rho: self.rho, ..*base }
    }
}

/// Ordinary least squares for `x' = -alpha x + beta u - rho x u`.
pub fn fit_parameters(samples: &[DerivativeSample]) -> Result<FittedParameters> {
    if samples.len() < 3 {
        return Err(Error::SingularSystem);
    }
    let m = samples.len();
    let mut a = DMatrix::<f64>::zeros(m, 3);
    let mut b = DVector::<f64>::zeros(m);
    for (i, s) in samples.iter().enumerate() {
        a[(i, 0)] = -s.x;
        a[(i, 1)] = s.u;
        a[(i, 2)] = -s.x * s.u;
        b[i] = s.x_dot;
    }
    let coef = least_squares(a, &b)?;
    Ok(FittedParameters { alpha: coef[0], beta: coef[1], rho: coef[2] })
}

/// Column-scaled SVD least squares; errors on numerical rank deficiency.
fn least_squares(mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let mut scale = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let norm = a.column(j).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularSystem);
        }
        a.column_mut(j).scale_mut(1.0 / norm);
        scale.push(norm);
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    if sv.min() <= max * 1e-10 {
        return Err(Error::SingularSystem);
    }
    let mut x = svd.solve(b, 0.0).map_err(|_| Error::SingularSystem)?;
    for (xi, s) in x.iter_mut().zip(scale) {
        *xi /= s;
    }
    Ok(x)
}

fn check_window(window: usize, degree: usize) -> Result<()> {
    if window.is_multiple_of(2) || degree < 1 || window <= degree {
        return Err(Error::InvalidArgument(format!(
            "need an odd window larger than the degree >= 1 (window {window}, degree {degree})"
        )));
    }
    Ok(())
}

/// Derivative at `times[at]` of the least-squares polynomial of `degree`
/// through the points in `range`.
fn local_derivative(
    times: &[f64],
    values: &[f64],
    range: std::ops::Range<usize>,
    at: usize,
    degree: usize,
) -> Result<f64> {
    let h = (times[range.end - 1] - times[range.start]) / (range.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("sample times must be increasing".into()));
    }
    let t0 = times[at];
    let mut v = DMatrix::<f64>::zeros(range.len(), degree + 1);
    let mut y = DVector::<f64>::zeros(range.len());
    for (row, i) in range.enumerate() {
        let tau = (times[i] - t0) / h;
        let mut pow = 1.0;
        for c in 0..=degree {
            v[(row, c)] = pow;
            pow *= tau;
        }
        y[row] = values[i];
    }
    let svd = v.svd(true, true);
    let coef = svd.solve(&y, 1e-13).map_err(|_| Error::SingularSystem)?;
    Ok(coef[1] / h)
}

/// Local polynomial-regression derivatives of a uniformly sampled series.
///
/// Each point uses the centred window of `window` samples; near the ends the
/// window is shifted to stay inside the series. Returns `(time, x, x')`.
pub fn estimate_derivatives(series: &[(f64, f64)], window: usize, degree: usize) -> Result<Vec<(f64, f64, f64)>> {
    check_window(window, degree)?;
    if series.len() < window {
        return Err(Error::TooShortSeries { len: series.len(), window });
    }
    let times: Vec<f64> = series.iter().map(|p| p.0).collect();
    let values: Vec<f64> = series.iter().map(|p| p.1).collect();
    let half = window / 2;
    (0..series.len())
        .map(|i| {
            let start = i.saturating_sub(half).min(series.len() - window);
            let d = local_derivative(&times, &values, start..start + window, i, degree)?;
            Ok((times[i], values[i], d))
        })
        .collect()
}

/// Builds regression samples from measurements, using only windows over
/// which the power stays constant. Points with no such window are skipped.
pub fn derivative_samples(
    series: &[Measurement],
    ambient: f64,
    window: usize,
    degree: usize,
) -> Result<Vec<DerivativeSample>> {
    check_window(window, degree)?;
    if series.len() < window {
        return Err(Error::TooShortSeries { len: series.len(), window });
    }
    let n = series.len();
    let times: Vec<f64> = series.iter().map(|m| m.time).collect();
    let xs: Vec<f64> = series.iter().map(|m| m.temperature - ambient).collect();
    let half = window / 2;
    let mut out = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(window - 1);
        let hi = i.min(n - window);
        let mut starts: Vec<usize> = (lo..=hi).collect();
        let centred = i.saturating_sub(half).min(n - window);
        starts.sort_by_key(|&s| s.abs_diff(centred));
        // power over [t_s, t_{s+window-1}] is given by rows s..s+window-2
        let chosen = starts.into_iter().find(|&s| {
            let p = series[s].power;
            series[s..s + window - 1].iter().all(|m| m.power == p)
        });
        if let Some(s) = chosen {
            let x_dot = local_derivative(&times, &xs, s..s + window, i, degree)?;
            out.push(DerivativeSample { x: xs[i], x_dot, u: series[s].power });
        }
    }
    Ok(out)
}

/// Identifies `(alpha, beta, rho)` from a measurement series.
pub fn identify(series: &[Measurement], ambient: f64, window: usize, degree: usize) -> Result<FittedParameters> {
    fit_parameters(&derivative_samples(series, ambient, window, degree)?)
}

/// Simulated temperatures under the measured power, one per sample,
/// starting from the first measured temperature.
pub fn simulate_measured(model: &BilinearFurnaceModel, series: &[Measurement]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let Some(first) = series.first() else { return out };
    let mut x = first.temperature - model.ambient;
    out.push(x + model.ambient);
    for w in series.windows(2) {
        x = model.segment_state(x, w[0].power, w[1].time - w[0].time);
        out.push(x + model.ambient);
    }
    out
}

/// Mean absolute percentage error of the simulated temperature (°C) against
/// the measured one.
pub fn mape(model: &BilinearFurnaceModel, series: &[Measurement]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("empty measurement series".into()));
    }
    if let Some(index) = series.iter().position(|m| m.temperature == 0.0) {
        return Err(Error::DivisionByZeroTemperature { index });
    }
    let sim = simulate_measured(model, series);
    let total: f64 = series.iter().zip(&sim).map(|(m, s)| (s - m.temperature).abs() / m.temperature.abs()).sum();
    Ok(100.0 * total / series.len() as f64)
}

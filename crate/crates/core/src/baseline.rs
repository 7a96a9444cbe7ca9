//! Finite-mode machine models and the time-indexed dynamic program used as a
//! comparison baseline.

use crate::furnace::BilinearFurnaceModel;
use crate::instances::{Instance, Schedule, Time};
use crate::scheduler::Solution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub hold_power: f64,
}

impl Mode {
    pub fn new(name: impl Into<String>, hold_power: f64) -> Self {
        Mode { name: name.into(), hold_power }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub duration: f64,
    pub energy: f64,
}

impl Transition {
    pub fn new(from: usize, to: usize, duration: f64, energy: f64) -> Self {
        Transition { from, to, duration, energy }
    }
}

/// Leaving the processing mode for a standby mode and coming back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub mode: usize,
    /// Shortest idle period that fits both transitions.
    pub threshold: f64,
    /// Energy of the two transitions.
    pub fixed_energy: f64,
    pub hold_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    modes: Vec<Mode>,
    processing_mode: usize,
    transitions: Vec<Transition>,
}

impl TransitionGraph {
    /// Validates hold powers, transition data, and that every standby mode
    /// has a direct transition from and back to the processing mode.
    pub fn new(modes: Vec<Mode>, processing_mode: usize, transitions: Vec<Transition>) -> Result<Self> {
        if processing_mode >= modes.len() {
            return Err(Error::InvalidArgument(format!("processing mode {processing_mode} out of range")));
        }
        for m in &modes {
            if !(m.hold_power >= 0.0 && m.hold_power.is_finite()) {
                return Err(Error::InvalidArgument(format!("mode {} has invalid hold power", m.name)));
            }
        }
        for t in &transitions {
            if t.from >= modes.len() || t.to >= modes.len() || t.from == t.to {
                return Err(Error::InvalidArgument(format!("transition {} -> {} is invalid", t.from, t.to)));
            }
            if !(t.duration > 0.0 && t.duration.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "transition {} -> {} needs a positive duration",
                    t.from, t.to
                )));
            }
            if !(t.energy >= 0.0 && t.energy.is_finite()) {
                return Err(Error::InvalidArgument(format!("transition {} -> {} has negative energy", t.from, t.to)));
            }
        }
        let g = TransitionGraph { modes, processing_mode, transitions };
        for m in 0..g.modes.len() {
            if m == processing_mode {
                continue;
            }
            let down = g.transitions.iter().any(|t| t.from == processing_mode && t.to == m);
            let up = g.transitions.iter().any(|t| t.from == m && t.to == processing_mode);
            if !(down && up) {
                return Err(Error::InvalidArgument(format!(
                    "mode {} is not reachable from and back to the processing mode",
                    g.modes[m].name
                )));
            }
        }
        Ok(g)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn processing_mode(&self) -> usize {
        self.processing_mode
    }

    pub fn processing_power(&self) -> f64 {
        self.modes[self.processing_mode].hold_power
    }

    pub fn excursions(&self) -> Vec<Excursion> {
        let p = self.processing_mode;
        let mut out = Vec::new();
        for down in self.transitions.iter().filter(|t| t.from == p) {
            for up in self.transitions.iter().filter(|t| t.to == p && t.from == down.to) {
                out.push(Excursion {
                    mode: down.to,
                    threshold: down.duration + up.duration,
                    fixed_energy: down.energy + up.energy,
                    hold_power: self.modes[down.to].hold_power,
                });
            }
        }
        out
    }

    /// Cheapest way to bridge an idle period of length `delta`.
    pub fn gap_cost(&self, delta: f64) -> f64 {
        let mut best = self.processing_power() * delta;
        for ex in self.excursions() {
            if ex.threshold <= delta {
                best = best.min(ex.fixed_energy + ex.hold_power * (delta - ex.threshold));
            }
        }
        best
    }

    /// Graph with one additional standby mode (and its two transitions).
    pub fn with_mode(&self, mode: Mode, down: (f64, f64), up: (f64, f64)) -> Result<Self> {
        let mut modes = self.modes.clone();
        let mut transitions = self.transitions.clone();
        let m = modes.len();
        modes.push(mode);
        transitions.push(Transition::new(self.processing_mode, m, down.0, down.1));
        transitions.push(Transition::new(m, self.processing_mode, up.0, up.1));
        TransitionGraph::new(modes, self.processing_mode, transitions)
    }
}

/// Furnace transition graph with one standby mode per temperature (°C).
///
/// The processing mode `on` holds the operating temperature; standby
/// `standby_<T>` holds `T` with trim power, is reached by switching off and
/// left by heating at full power.
pub fn derive_transition_graph(model: &BilinearFurnaceModel, standby_temps: &[f64]) -> Result<TransitionGraph> {
    model.check_admissible()?;
    let x0 = model.x0;
    let mut modes = vec![Mode::new("on", model.trim_power(x0)?)];
    let mut transitions = Vec::new();
    for &temp in standby_temps {
        if !(temp > model.ambient && temp < model.operating_temperature()) {
            return Err(Error::OutOfRange(format!(
                "standby temperature {temp} must lie strictly between ambient and operating temperature"
            )));
        }
        let xs = temp - model.ambient;
        let hold = model.trim_power(xs)?;
        let m = modes.len();
        modes.push(Mode::new(format!("standby_{}", fmt_temp(temp)), hold));
        transitions.push(Transition::new(0, m, model.cool_down_time(x0, xs)?, 0.0));
        let up = model.heat_up_time(xs, x0)?;
        transitions.push(Transition::new(m, 0, up, model.u_max * up));
    }
    TransitionGraph::new(modes, 0, transitions)
}

fn fmt_temp(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

/// Time-indexed DP on a grid of `step` time units.
///
/// Each state is a task together with its (grid) start time; moving to the
/// next task bridges a gap priced by [`TransitionGraph::gap_cost`]. Runs in
/// `O(|H|^2 n)` time. Among optimal schedules the one with the earliest
/// starts (compared from the last task backwards) is returned.
pub fn dp_solve(instance: &Instance, g: &TransitionGraph, step: Time) -> Result<Solution> {
    if step <= 0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let inst = instance.ensure_propagated()?;
    let tasks = inst.tasks();
    if tasks.iter().any(|t| t.release % step != 0 || t.deadline % step != 0 || t.processing % step != 0) {
        return Err(Error::InvalidArgument(format!("step {step} does not divide all task data")));
    }
    let h = inst.horizon() / step;
    let cost: Vec<f64> = (0..=h).map(|k| g.gap_cost((k * step) as f64)).collect();

    // windows in grid units
    let win: Vec<(Time, Time)> = tasks.iter().map(|t| (t.release / step, t.latest_start() / step)).collect();
    let mut value: Vec<f64> = vec![0.0; (win[0].1 - win[0].0 + 1) as usize];
    let mut back: Vec<Vec<u32>> = Vec::with_capacity(tasks.len());
    back.push(Vec::new());
    for j in 1..tasks.len() {
        let (plo, phi) = win[j - 1];
        let (lo, hi) = win[j];
        let p = tasks[j - 1].processing / step;
        let mut next = vec![f64::INFINITY; (hi - lo + 1) as usize];
        let mut arg = vec![u32::MAX; next.len()];
        for (k, s) in (lo..=hi).enumerate() {
            let last_prev = phi.min(s - p);
            let mut best = f64::INFINITY;
            let mut best_at = u32::MAX;
            for sp in plo..=last_prev {
                let v = value[(sp - plo) as usize] + cost[(s - sp - p) as usize];
                if v < best {
                    best = v;
                    best_at = (sp - plo) as u32;
                }
            }
            next[k] = best;
            arg[k] = best_at;
        }
        value = next;
        back.push(arg);
    }
    let (mut idx, energy) =
        value.iter().enumerate().fold((usize::MAX, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !energy.is_finite() {
        return Err(Error::NoPath);
    }
    let mut starts = vec![0.0; tasks.len()];
    for j in (0..tasks.len()).rev() {
        starts[j] = ((win[j].0 + idx as Time) * step) as f64;
        if j > 0 {
            idx = back[j][idx] as usize;
        }
    }
    Ok(Solution { schedule: Schedule::new(starts), energy, supports: Vec::new() })
}

/// Average power over the idle capacity of the instance.
pub fn average_idle_power(instance: &Instance, energy: f64) -> Result<f64> {
    let inst = instance.ensure_propagated()?;
    let capacity = inst.idle_capacity();
    if capacity <= 0 {
        return Err(Error::FullyUtilised);
    }
    Ok(energy / capacity as f64)
}

//! Task data model, execution-window propagation, schedule validation and
//! the random instance generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::energy::IdleEnergyFunction;
use crate::{Error, Result, TIME_EPS};

/// Integer time in abstract units (minutes under the furnace convention).
pub type Time = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Task {
    pub release: Time,
    pub deadline: Time,
    pub processing: Time,
}

impl Task {
    pub fn new(release: Time, deadline: Time, processing: Time) -> Self {
        Task { release, deadline, processing }
    }

    /// Latest start time permitted by the deadline.
    #[inline]
    pub fn latest_start(&self) -> Time {
        self.deadline - self.processing
    }

    fn check(&self, index: usize) -> Result<()> {
        let fail = |reason: &str| Err(Error::InvalidTask { index, reason: reason.to_string() });
        if self.release < 0 {
            return fail("negative release time");
        }
        if self.processing < 1 {
            return fail("processing time must be positive");
        }
        if self.deadline < 1 {
            return fail("deadline must be positive");
        }
        if self.release + self.processing > self.deadline {
            return fail("release + processing exceeds deadline");
        }
        Ok(())
    }
}

/// Tasks in their fixed processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    tasks: Vec<Task>,
    propagated: bool,
}

impl Instance {
    /// Builds an instance, checking every task is individually well formed.
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidArgument("instance has no tasks".into()));
        }
        for (i, t) in tasks.iter().enumerate() {
            t.check(i)?;
        }
        Ok(Instance { tasks, propagated: false })
    }

    pub fn from_triples(triples: &[(Time, Time, Time)]) -> Result<Self> {
        Self::new(triples.iter().map(|&(r, d, p)| Task::new(r, d, p)).collect())
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn is_propagated(&self) -> bool {
        self.propagated
    }

    pub fn total_processing(&self) -> Time {
        self.tasks.iter().map(|t| t.processing).sum()
    }

    /// `d_n - r_1`.
    pub fn horizon(&self) -> Time {
        self.tasks.last().unwrap().deadline - self.tasks[0].release
    }

    /// Tightens releases left to right and deadlines right to left.
    ///
    /// Fails with [`Error::InfeasibleOrder`] when some window becomes shorter
    /// than its task's processing time.
    pub fn propagate_windows(&self) -> Result<Instance> {
        let mut tasks = self.tasks.clone();
        for i in 1..tasks.len() {
            let prev_end = tasks[i - 1].release + tasks[i - 1].processing;
            tasks[i].release = tasks[i].release.max(prev_end);
        }
        for i in (0..tasks.len().saturating_sub(1)).rev() {
            let next_latest = tasks[i + 1].deadline - tasks[i + 1].processing;
            tasks[i].deadline = tasks[i].deadline.min(next_latest);
        }
        if let Some(task) = tasks.iter().position(|t| t.deadline - t.release < t.processing) {
            return Err(Error::InfeasibleOrder { task });
        }
        Ok(Instance { tasks, propagated: true })
    }

    /// Returns `self` if already propagated, otherwise a propagated copy.
    pub fn ensure_propagated(&self) -> Result<std::borrow::Cow<'_, Instance>> {
        if self.propagated {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            Ok(std::borrow::Cow::Owned(self.propagate_windows()?))
        }
    }

    /// Sum of processing times over the horizon length.
    pub fn utilization(&self) -> Result<f64> {
        let horizon = self.horizon();
        if horizon <= 0 {
            return Err(Error::DegenerateHorizon);
        }
        Ok(self.total_processing() as f64 / horizon as f64)
    }

    /// Horizon length minus total processing: the idle capacity.
    pub fn idle_capacity(&self) -> Time {
        self.horizon() - self.total_processing()
    }

    /// Every task as early as possible.
    pub fn left_aligned(&self) -> Schedule {
        let mut starts = Vec::with_capacity(self.len());
        let mut t = self.tasks[0].release;
        for task in &self.tasks {
            t = t.max(task.release);
            starts.push(t as f64);
            t += task.processing;
        }
        Schedule::new(starts)
    }

    /// Checks order, non-overlap and window constraints.
    pub fn validate_schedule(&self, schedule: &Schedule) -> bool {
        self.schedule_violation(schedule).is_none()
    }

    /// Describes the first violated constraint, if any.
    pub fn schedule_violation(&self, schedule: &Schedule) -> Option<String> {
        let starts = schedule.starts();
        if starts.len() != self.len() {
            return Some(format!("expected {} start times, got {}", self.len(), starts.len()));
        }
        for (i, (task, &s)) in self.tasks.iter().zip(starts).enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Some(format!("task {} has invalid start {s}", i + 1));
            }
            if s + TIME_EPS < task.release as f64 {
                return Some(format!("task {} starts at {s} before its release {}", i + 1, task.release));
            }
            if s + task.processing as f64 > task.deadline as f64 + TIME_EPS {
                return Some(format!("task {} ends after its deadline {}", i + 1, task.deadline));
            }
            if i + 1 < starts.len() && s + task.processing as f64 > starts[i + 1] + TIME_EPS {
                return Some(format!("task {} overlaps task {}", i + 1, i + 2));
            }
        }
        None
    }

    /// Idle period lengths between consecutive tasks.
    pub fn idle_gaps(&self, schedule: &Schedule) -> Vec<f64> {
        let s = schedule.starts();
        self.tasks.windows(2).enumerate().map(|(i, w)| (s[i + 1] - (s[i] + w[0].processing as f64)).max(0.0)).collect()
    }

    /// Total idle energy of a valid schedule. Nothing is charged before the
    /// first task or after the last.
    pub fn total_idle_energy<F: IdleEnergyFunction + ?Sized>(&self, schedule: &Schedule, f: &F) -> Result<f64> {
        if let Some(why) = self.schedule_violation(schedule) {
            return Err(Error::InvalidSchedule(why));
        }
        Ok(self.idle_gaps(schedule).into_iter().map(|gap| f.energy(gap)).sum())
    }
}

/// Start times, one per task, in task order.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    starts: Vec<f64>,
}

impl Schedule {
    pub fn new(starts: Vec<f64>) -> Self {
        Schedule { starts }
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn into_starts(self) -> Vec<f64> {
        self.starts
    }

    /// True when every start time is an integer.
    pub fn is_integral(&self) -> bool {
        self.starts.iter().all(|s| s.fract() == 0.0)
    }
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub p_min: Time,
    pub p_max: Time,
    /// Scale of the release gaps relative to the mean processing time.
    pub gamma: f64,
    /// Scale of the deadline slack relative to the mean processing time.
    pub delta: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, gamma: f64, delta: f64, seed: u64) -> Self {
        GeneratorConfig { n, p_min: 1, p_max: 300, gamma, delta, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.p_min < 1 || self.p_min > self.p_max {
            return Err(Error::InvalidArgument("require 1 <= p_min <= p_max".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument("gamma and delta must be positive".into()));
        }
        Ok(())
    }
}

/// Draws a random instance.
///
/// Processing times are uniform on `p_min..=p_max`; release gaps and deadline
/// slacks are exponential with scales `gamma * mean(p)` and `delta * mean(p)`,
/// added before the ceiling. Deadlines are then propagated right to left.
/// The stream comes from ChaCha8 seeded with `config.seed`, so a seed yields
/// the same instance on every platform.
pub fn generate_instance(config: &GeneratorConfig) -> Result<Instance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;

    let processing: Vec<Time> = (0..n).map(|_| rng.random_range(config.p_min..=config.p_max)).collect();
    let mean = processing.iter().sum::<Time>() as f64 / n as f64;
    let gap = Exp::new(1.0 / (config.gamma * mean)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let slack = Exp::new(1.0 / (config.delta * mean)).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut tasks = Vec::with_capacity(n);
    let release = 0;
    let deadline = ((release + processing[0]) as f64 + slack.sample(&mut rng)).ceil() as Time;
    tasks.push(Task::new(release, deadline, processing[0]));
    for i in 1..n {
        let prev = tasks[i - 1];
        let release = ((prev.release + prev.processing) as f64 + gap.sample(&mut rng)).ceil() as Time;
        let deadline = ((release + processing[i]) as f64 + slack.sample(&mut rng)).ceil() as Time;
        tasks.push(Task::new(release, deadline, processing[i]));
    }
    for i in (0..n.saturating_sub(1)).rev() {
        let latest = tasks[i + 1].deadline - tasks[i + 1].processing;
        tasks[i].deadline = tasks[i].deadline.min(latest);
    }
    // Releases are already propagated, so this only re-checks the windows.
    Instance::new(tasks)?.propagate_windows()
}

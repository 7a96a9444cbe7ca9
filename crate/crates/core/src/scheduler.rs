//! Exact idle-energy minimisation for concave idle energy functions.
//!
//! Some optimal schedule is in block form: every maximal run of back-to-back
//! tasks contains a *support*, a task starting at its release time or ending
//! at its deadline. Supports become vertices of a DAG (the energy graph)
//! whose edges join consecutive supports that admit a feasible packing of
//! the tasks in between, priced by the idle energy of the single gap
//! separating their blocks. A shortest source-to-sink path is an optimal
//! schedule. Construction is `O(n^3)`, the path search linear in the graph.

use std::fmt::Write as _;

use crate::energy::{check_concavity_on, ConcavityVerdict, IdleEnergyFunction};
use crate::instances::{Instance, Schedule, Time};
use crate::{Error, Result, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SupportVertex {
    Source,
    /// Task (0-based) starts at its release time.
    Release(usize),
    /// Task (0-based) ends at its deadline.
    Deadline(usize),
    Sink,
}

impl SupportVertex {
    pub fn task(&self) -> Option<usize> {
        match *self {
            SupportVertex::Release(i) | SupportVertex::Deadline(i) => Some(i),
            _ => None,
        }
    }

    /// Start time the vertex pins its task to.
    pub fn fixed_start(&self, instance: &Instance) -> Result<Time> {
        match *self {
            SupportVertex::Release(i) => Ok(instance.tasks()[i].release),
            SupportVertex::Deadline(i) => Ok(instance.tasks()[i].latest_start()),
            _ => Err(Error::NotATaskVertex),
        }
    }

    /// Position in the topological order used by [`EnergyGraph`].
    pub fn index(&self, n: usize) -> usize {
        match *self {
            SupportVertex::Source => 0,
            SupportVertex::Release(i) => 1 + 2 * i,
            SupportVertex::Deadline(i) => 2 + 2 * i,
            SupportVertex::Sink => 2 * n + 1,
        }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        match index {
            0 => SupportVertex::Source,
            k if k == 2 * n + 1 => SupportVertex::Sink,
            k if k % 2 == 1 => SupportVertex::Release((k - 1) / 2),
            k => SupportVertex::Deadline((k - 2) / 2),
        }
    }

    fn label(&self, n: usize) -> String {
        match *self {
            SupportVertex::Source => "source:0".to_string(),
            SupportVertex::Release(i) => format!("r:{}", i + 1),
            SupportVertex::Deadline(i) => format!("d:{}", i + 1),
            SupportVertex::Sink => format!("sink:{}", n + 1),
        }
    }
}

/// How the tasks around an edge are packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Source edge: all earlier tasks right-aligned against the support.
    Prefix,
    /// Sink edge: all later tasks left-aligned after the support.
    Suffix,
    /// Tasks up to `split` (0-based, inclusive) left-aligned after the first
    /// support, the rest right-aligned before the second; `gap` idle time
    /// separates the two blocks.
    Between { split: usize, gap: Time },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub kind: EdgeKind,
}

/// Idle time between the blocks supported by `v1` and `v2` (task of `v1`
/// before task of `v2`). Negative when the supports cannot be consecutive.
pub fn idle_gap(v1: SupportVertex, v2: SupportVertex, instance: &Instance) -> Result<Time> {
    let (i, j) = match (v1.task(), v2.task()) {
        (Some(i), Some(j)) if i < j => (i, j),
        _ => return Err(Error::InvalidArgument("idle_gap needs two task vertices in order".into())),
    };
    let tasks = instance.tasks();
    let between: Time = tasks[i + 1..j].iter().map(|t| t.processing).sum();
    Ok(v2.fixed_start(instance)? - (v1.fixed_start(instance)? + tasks[i].processing) - between)
}

/// Prefix sums of processing times, `pre[a] = p_0 + .. + p_{a-1}`.
struct Packing<'a> {
    instance: &'a Instance,
    pre: Vec<Time>,
}

impl<'a> Packing<'a> {
    fn new(instance: &'a Instance) -> Self {
        let mut pre = Vec::with_capacity(instance.len() + 1);
        pre.push(0);
        for t in instance.tasks() {
            pre.push(pre.last().unwrap() + t.processing);
        }
        Packing { instance, pre }
    }

    #[inline]
    fn fits(&self, a: usize, start: Time) -> bool {
        let t = &self.instance.tasks()[a];
        t.release <= start && start <= t.latest_start()
    }

    /// Largest `A >= i` such that tasks `i+1..=A` (capped below `end`) fit
    /// when packed right after task `i` starting at `start`.
    fn left_reach(&self, i: usize, start: Time, end: usize) -> usize {
        let mut a = i + 1;
        while a < end && self.fits(a, start + self.pre[a] - self.pre[i]) {
            a += 1;
        }
        a - 1
    }

    /// Smallest `B <= j` such that tasks `B..j` (not below `begin`) fit when
    /// packed right before task `j` starting at `start`.
    fn right_reach(&self, j: usize, start: Time, begin: usize) -> usize {
        let mut b = j;
        while b > begin && self.fits(b - 1, start - (self.pre[j] - self.pre[b - 1])) {
            b -= 1;
        }
        b
    }

    fn check(&self, v1: SupportVertex, v2: SupportVertex) -> Option<EdgeKind> {
        let n = self.instance.len();
        match (v1, v2) {
            (SupportVertex::Source, v) => {
                let j = v.task()?;
                let st = v.fixed_start(self.instance).ok()?;
                (self.right_reach(j, st, 0) == 0).then_some(EdgeKind::Prefix)
            }
            (v, SupportVertex::Sink) => {
                let i = v.task()?;
                let st = v.fixed_start(self.instance).ok()?;
                (self.left_reach(i, st, n) == n - 1).then_some(EdgeKind::Suffix)
            }
            (a, b) => {
                let (i, j) = (a.task()?, b.task()?);
                if i >= j {
                    return None;
                }
                let (s1, s2) = (a.fixed_start(self.instance).ok()?, b.fixed_start(self.instance).ok()?);
                let gap = s2 - s1 - (self.pre[j] - self.pre[i]);
                if gap < 0 {
                    return None;
                }
                let reach_a = self.left_reach(i, s1, j);
                let reach_b = self.right_reach(j, s2, i + 1);
                (reach_b <= reach_a + 1).then_some(EdgeKind::Between { split: reach_a, gap })
            }
        }
    }
}

/// Whether `v1 -> v2` is an energy-graph edge on a propagated instance, and
/// how the tasks in between are packed. Linear in the number of tasks.
pub fn edge_feasible(v1: SupportVertex, v2: SupportVertex, instance: &Instance) -> Option<EdgeKind> {
    Packing::new(instance).check(v1, v2)
}

#[derive(Debug, Clone)]
pub struct EnergyGraph {
    instance: Instance,
    edges: Vec<Edge>,
}

impl EnergyGraph {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn vertex_count(&self) -> usize {
        2 * self.instance.len() + 2
    }

    pub fn vertex(&self, index: usize) -> SupportVertex {
        SupportVertex::from_index(index, self.instance.len())
    }

    /// Edges grouped by target in topological order, sources ascending
    /// within each group.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn find_edge(&self, from: SupportVertex, to: SupportVertex) -> Option<&Edge> {
        let n = self.instance.len();
        let (f, t) = (from.index(n), to.index(n));
        self.edges.iter().find(|e| e.from == f && e.to == t)
    }

    /// One line per edge: `from_kind:task -> to_kind:task cost=<c> split=<k>`
    /// with 1-based task numbers and `split=-` on source and sink edges.
    pub fn dump(&self) -> String {
        let n = self.instance.len();
        let mut out = String::new();
        for e in &self.edges {
            let split = match e.kind {
                EdgeKind::Between { split, .. } => (split + 1).to_string(),
                _ => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "{} -> {} cost={} split={}",
                self.vertex(e.from).label(n),
                self.vertex(e.to).label(n),
                e.cost,
                split
            );
        }
        out
    }
}

fn build_with(instance: &Instance, mut cost: impl FnMut(Time) -> f64) -> Result<EnergyGraph> {
    let instance = instance.ensure_propagated()?.into_owned();
    let n = instance.len();
    let packing = Packing::new(&instance);
    let mut edges = Vec::new();
    for to in 1..=2 * n + 1 {
        let v2 = SupportVertex::from_index(to, n);
        let upper = match v2.task() {
            Some(j) => 1 + 2 * j,
            None => 2 * n + 1,
        };
        for from in 0..upper {
            let v1 = SupportVertex::from_index(from, n);
            if v1 == SupportVertex::Source && v2 == SupportVertex::Sink {
                continue;
            }
            if let Some(kind) = packing.check(v1, v2) {
                let c = match kind {
                    EdgeKind::Between { gap, .. } => cost(gap),
                    _ => 0.0,
                };
                edges.push(Edge { from, to, cost: c, kind });
            }
        }
    }
    Ok(EnergyGraph { instance, edges })
}

/// Builds the energy graph, pricing each inter-block gap with `f`.
///
/// `f` is checked for monotonicity and concavity on the set of gap lengths
/// that actually occur (plus zero); a violation yields
/// [`Error::NonConcaveFunction`].
pub fn build_energy_graph<F: IdleEnergyFunction + ?Sized>(instance: &Instance, f: &F) -> Result<EnergyGraph> {
    let mut gaps = vec![0.0];
    let graph = build_with(instance, |gap| {
        let g = gap as f64;
        gaps.push(g);
        f.energy(g)
    })?;
    if f.energy(0.0).abs() > crate::energy::CONCAVITY_TOL {
        return Err(Error::NonConcaveFunction { at: 0.0 });
    }
    match check_concavity_on(f, &gaps) {
        ConcavityVerdict::Ok => Ok(graph),
        ConcavityVerdict::NotConcave { at } | ConcavityVerdict::Decreasing { at } => {
            Err(Error::NonConcaveFunction { at })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Indices into [`EnergyGraph::edges`], source to sink.
    pub edges: Vec<usize>,
    pub cost: f64,
}

impl Path {
    /// Vertex sequence including source and sink.
    pub fn vertices(&self, graph: &EnergyGraph) -> Vec<SupportVertex> {
        let mut v = vec![SupportVertex::Source];
        v.extend(self.edges.iter().map(|&e| graph.vertex(graph.edges[e].to)));
        v
    }
}

/// Minimum-cost source-to-sink path by one pass over the edges in
/// topological order. Among equal-cost predecessors the smallest
/// `(task, release < deadline)` wins.
pub fn shortest_path(graph: &EnergyGraph) -> Result<Path> {
    let nv = graph.vertex_count();
    let mut dist = vec![f64::INFINITY; nv];
    let mut pred = vec![usize::MAX; nv];
    dist[0] = 0.0;
    for (k, e) in graph.edges.iter().enumerate() {
        let d = dist[e.from] + e.cost;
        if d < dist[e.to] {
            dist[e.to] = d;
            pred[e.to] = k;
        }
    }
    let sink = nv - 1;
    if !dist[sink].is_finite() {
        return Err(Error::NoPath);
    }
    let mut edges = Vec::new();
    let mut v = sink;
    while v != 0 {
        let k = pred[v];
        edges.push(k);
        v = graph.edges[k].from;
    }
    edges.reverse();
    Ok(Path { edges, cost: dist[sink] })
}

/// Start times realising a source-to-sink path.
pub fn extract_schedule(graph: &EnergyGraph, path: &Path) -> Result<Schedule> {
    let inst = &graph.instance;
    let tasks = inst.tasks();
    let mut starts = vec![f64::NAN; inst.len()];
    for &k in &path.edges {
        let e = &graph.edges[k];
        let (v1, v2) = (graph.vertex(e.from), graph.vertex(e.to));
        match e.kind {
            EdgeKind::Prefix => {
                let j = v2.task().ok_or(Error::NoPath)?;
                let mut t = v2.fixed_start(inst)?;
                starts[j] = t as f64;
                for b in (0..j).rev() {
                    t -= tasks[b].processing;
                    starts[b] = t as f64;
                }
            }
            EdgeKind::Suffix => {
                let i = v1.task().ok_or(Error::NoPath)?;
                let mut t = v1.fixed_start(inst)?;
                starts[i] = t as f64;
                for a in i + 1..inst.len() {
                    t += tasks[a - 1].processing;
                    starts[a] = t as f64;
                }
            }
            EdgeKind::Between { split, .. } => {
                let (i, j) = (v1.task().ok_or(Error::NoPath)?, v2.task().ok_or(Error::NoPath)?);
                let mut t = v1.fixed_start(inst)?;
                starts[i] = t as f64;
                for a in i + 1..=split {
                    t += tasks[a - 1].processing;
                    starts[a] = t as f64;
                }
                let mut t = v2.fixed_start(inst)?;
                starts[j] = t as f64;
                for b in (split + 1..j).rev() {
                    t -= tasks[b].processing;
                    starts[b] = t as f64;
                }
            }
        }
    }
    if starts.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("path does not cover every task".into()));
    }
    Ok(Schedule::new(starts))
}

/// An optimal schedule with its idle energy and the supporting path.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub schedule: Schedule,
    pub energy: f64,
    /// Supports of the blocks, source and sink excluded. Empty for solvers
    /// that do not go through the energy graph.
    pub supports: Vec<SupportVertex>,
}

/// Propagates windows, builds the energy graph and returns a minimum idle
/// energy schedule.
pub fn solve<F: IdleEnergyFunction + ?Sized>(instance: &Instance, f: &F) -> Result<Solution> {
    let graph = build_energy_graph(instance, f)?;
    solution_from_graph(&graph)
}

fn solution_from_graph(graph: &EnergyGraph) -> Result<Solution> {
    let path = shortest_path(graph)?;
    let schedule = extract_schedule(graph, &path)?;
    let mut supports = path.vertices(graph);
    supports.retain(|v| v.task().is_some());
    Ok(Solution { schedule, energy: path.cost, supports })
}

/// Minimises the number of non-zero idle periods: every inter-block edge
/// costs one.
pub fn min_switches_solve(instance: &Instance) -> Result<(Schedule, usize)> {
    let graph = build_with(instance, |_| 1.0)?;
    let sol = solution_from_graph(&graph)?;
    let count = graph.instance.idle_gaps(&sol.schedule).into_iter().filter(|&g| g > TIME_EPS).count();
    Ok((sol.schedule, count))
}

/// Maximal run of back-to-back tasks, as an inclusive index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub first: usize,
    pub last: usize,
}

impl Block {
    pub fn tasks(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

pub fn blocks(instance: &Instance, schedule: &Schedule) -> Vec<Block> {
    let s = schedule.starts();
    let tasks = instance.tasks();
    let mut out = Vec::new();
    let mut first = 0;
    for k in 0..s.len() {
        let last = k + 1 == s.len();
        if last || (s[k + 1] - (s[k] + tasks[k].processing as f64)).abs() > TIME_EPS {
            out.push(Block { first, last: k });
            first = k + 1;
        }
    }
    out
}

/// Whether task `k` is a support in `schedule`.
pub fn is_support(instance: &Instance, schedule: &Schedule, k: usize) -> bool {
    let t = &instance.tasks()[k];
    let s = schedule.starts()[k];
    (s - t.release as f64).abs() <= TIME_EPS || (s - t.latest_start() as f64).abs() <= TIME_EPS
}

pub fn block_has_support(instance: &Instance, schedule: &Schedule, block: &Block) -> bool {
    block.tasks().any(|k| is_support(instance, schedule, k))
}

pub fn is_block_form(instance: &Instance, schedule: &Schedule) -> bool {
    blocks(instance, schedule).iter().all(|b| block_has_support(instance, schedule, b))
}

/// Shifts blocks without a support until every block has one.
///
/// Each unsupported block moves toward its shorter neighbouring idle period
/// (right on ties; the first block always moves right and the last left) as
/// far as windows and neighbours allow. For concave `f` this never raises
/// the idle energy; if it does, `f` is reported as non-concave.
pub fn normalize_to_block_form<F: IdleEnergyFunction + ?Sized>(
    instance: &Instance,
    schedule: &Schedule,
    f: &F,
) -> Result<Schedule> {
    let before_energy = instance.total_idle_energy(schedule, f)?;
    let tasks = instance.tasks();
    let p = |k: usize| tasks[k].processing as f64;
    let mut s = schedule.starts().to_vec();

    for _ in 0..=instance.len() {
        let current = Schedule::new(s.clone());
        let bl = blocks(instance, &current);
        let Some(bi) = bl.iter().position(|b| !block_has_support(instance, &current, b)) else {
            let out = Schedule::new(s);
            let after_energy = instance.total_idle_energy(&out, f)?;
            if after_energy > before_energy + crate::energy::CONCAVITY_TOL * (1.0 + before_energy.abs()) {
                return Err(Error::NonConcaveFunction { at: f64::NAN });
            }
            return Ok(out);
        };
        let b = bl[bi];
        let gap_before = if bi == 0 { f64::INFINITY } else { s[b.first] - (s[b.first - 1] + p(b.first - 1)) };
        let gap_after = if bi + 1 == bl.len() { f64::INFINITY } else { s[b.last + 1] - (s[b.last] + p(b.last)) };

        if gap_after <= gap_before {
            // shift right
            let (slack, anchor) = b
                .tasks()
                .map(|k| (tasks[k].latest_start() as f64 - s[k], k))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .unwrap();
            if gap_after <= slack {
                let end = s[b.last + 1];
                repack_ending_at(&mut s, tasks, b, end);
            } else {
                s[anchor] = tasks[anchor].latest_start() as f64;
                repack_around(&mut s, tasks, b, anchor);
            }
        } else {
            let (slack, anchor) =
                b.tasks().map(|k| (s[k] - tasks[k].release as f64, k)).min_by(|x, y| x.0.total_cmp(&y.0)).unwrap();
            if gap_before <= slack {
                let start = s[b.first - 1] + p(b.first - 1);
                s[b.first] = start;
                repack_around(&mut s, tasks, b, b.first);
            } else {
                s[anchor] = tasks[anchor].release as f64;
                repack_around(&mut s, tasks, b, anchor);
            }
        }
    }
    Err(Error::InvalidArgument("block normalisation did not terminate".into()))
}

fn repack_around(s: &mut [f64], tasks: &[crate::instances::Task], b: Block, anchor: usize) {
    for k in anchor + 1..=b.last {
        s[k] = s[k - 1] + tasks[k - 1].processing as f64;
    }
    for k in (b.first..anchor).rev() {
        s[k] = s[k + 1] - tasks[k].processing as f64;
    }
}

fn repack_ending_at(s: &mut [f64], tasks: &[crate::instances::Task], b: Block, end: f64) {
    s[b.last] = end - tasks[b.last].processing as f64;
    repack_around(s, tasks, b, b.last);
}

/// Test oracle: exact optimum by dynamic programming over integer start
/// times. Limited to `n <= 8` tasks and a horizon of at most 200.
pub fn brute_force_solve<F: IdleEnergyFunction + ?Sized>(instance: &Instance, f: &F) -> Result<Solution> {
    let inst = instance.ensure_propagated()?;
    if inst.len() > 8 || inst.horizon() > 200 {
        return Err(Error::TooLarge(format!("n = {}, horizon = {}", inst.len(), inst.horizon())));
    }
    let tasks = inst.tasks();
    // best[k][s - r_k]: least energy with task k starting at s
    let mut best: Vec<Vec<f64>> = Vec::with_capacity(tasks.len());
    let mut from: Vec<Vec<Time>> = Vec::with_capacity(tasks.len());
    best.push(vec![0.0; (tasks[0].latest_start() - tasks[0].release + 1) as usize]);
    from.push(vec![-1; best[0].len()]);
    for k in 1..tasks.len() {
        let (prev, cur) = (&tasks[k - 1], &tasks[k]);
        let mut row = Vec::new();
        let mut arg = Vec::new();
        for s in cur.release..=cur.latest_start() {
            let mut bv = f64::INFINITY;
            let mut ba = -1;
            for sp in prev.release..=prev.latest_start() {
                let gap = s - sp - prev.processing;
                if gap < 0 {
                    break;
                }
                let v = best[k - 1][(sp - prev.release) as usize] + f.energy(gap as f64);
                if v < bv {
                    bv = v;
                    ba = sp;
                }
            }
            row.push(bv);
            arg.push(ba);
        }
        best.push(row);
        from.push(arg);
    }
    let last = tasks.len() - 1;
    let (mut idx, energy) =
        best[last].iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !energy.is_finite() {
        return Err(Error::NoPath);
    }
    let mut starts = vec![0.0; tasks.len()];
    let mut s = tasks[last].release + idx as Time;
    for k in (0..tasks.len()).rev() {
        starts[k] = s as f64;
        if k > 0 {
            idx = (s - tasks[k].release) as usize;
            s = from[k][idx];
        }
    }
    Ok(Solution { schedule: Schedule::new(starts), energy, supports: Vec::new() })
}

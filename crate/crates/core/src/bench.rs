//! Benchmark harness: continuous furnace energy versus transition-graph
//! models, compared by average power per idle time.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::baseline::{average_idle_power, derive_transition_graph, dp_solve, TransitionGraph};
use crate::energy::PiecewiseLinearConcave;
use crate::furnace::BilinearFurnaceModel;
use crate::instances::Instance;
use crate::scheduler::solve;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelLabel {
    Continuous,
    G600,
    G700,
    G600700,
}

impl ModelLabel {
    pub const ALL: [ModelLabel; 4] = [ModelLabel::Continuous, ModelLabel::G600, ModelLabel::G700, ModelLabel::G600700];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLabel::Continuous => "E_cont",
            ModelLabel::G600 => "G_600",
            ModelLabel::G700 => "G_700",
            ModelLabel::G600700 => "G_600_700",
        }
    }

    fn standby_temps(&self) -> &'static [f64] {
        match self {
            ModelLabel::Continuous => &[],
            ModelLabel::G600 => &[600.0],
            ModelLabel::G700 => &[700.0],
            ModelLabel::G600700 => &[600.0, 700.0],
        }
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelLabel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown model label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub instance_id: String,
    pub n: usize,
    pub utilization: f64,
    pub model: ModelLabel,
    pub energy: f64,
    pub average_power: f64,
    /// Seconds.
    pub wall_time: f64,
}

/// The furnace energy function tabulated on integer gaps, and the three
/// derived transition graphs.
#[derive(Debug, Clone)]
pub struct BenchmarkModels {
    pub furnace: BilinearFurnaceModel,
    pub continuous: PiecewiseLinearConcave,
    pub graphs: Vec<(ModelLabel, TransitionGraph)>,
}

impl BenchmarkModels {
    /// `max_gap` should cover the largest horizon to be solved; the table
    /// stops early once the energy saturates.
    pub fn new(furnace: &BilinearFurnaceModel, max_gap: f64) -> Result<Self> {
        let continuous = furnace.tabulate(max_gap.max(1.0), 1.0)?;
        let graphs = ModelLabel::ALL[1..]
            .iter()
            .map(|&m| Ok((m, derive_transition_graph(furnace, m.standby_temps())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BenchmarkModels { furnace: *furnace, continuous, graphs })
    }

    pub fn graph(&self, label: ModelLabel) -> Option<&TransitionGraph> {
        self.graphs.iter().find(|(m, _)| *m == label).map(|(_, g)| g)
    }
}

/// Solves one instance under every model.
pub fn run_instance(id: &str, instance: &Instance, models: &BenchmarkModels) -> Result<Vec<BenchmarkRecord>> {
    let inst = instance.propagate_windows()?;
    let utilization = inst.utilization()?;
    let record = |model, energy: f64, started: Instant| -> Result<BenchmarkRecord> {
        Ok(BenchmarkRecord {
            instance_id: id.to_string(),
            n: inst.len(),
            utilization,
            model,
            energy,
            average_power: average_idle_power(&inst, energy)?,
            wall_time: started.elapsed().as_secs_f64(),
        })
    };
    let mut out = Vec::with_capacity(4);
    let t = Instant::now();
    let sol = solve(&inst, &models.continuous)?;
    out.push(record(ModelLabel::Continuous, sol.energy, t)?);
    for (label, g) in &models.graphs {
        let t = Instant::now();
        let sol = dp_solve(&inst, g, 1)?;
        out.push(record(*label, sol.energy, t)?);
    }
    Ok(out)
}

/// Solves all instances on at most `workers` threads (all cores when
/// `None`). Records are ordered by instance id, then model.
pub fn run_benchmark(
    instances: &[(String, Instance)],
    models: &BenchmarkModels,
    workers: Option<usize>,
) -> Result<Vec<BenchmarkRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_instance: Vec<Vec<BenchmarkRecord>> = pool.install(|| {
        instances.par_iter().map(|(id, inst)| run_instance(id, inst, models)).collect::<Result<Vec<_>>>()
    })?;
    let mut records: Vec<BenchmarkRecord> = per_instance.into_iter().flatten().collect();
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id).then(a.model.cmp(&b.model)));
    Ok(records)
}

/// Utilisation bucket `(k/10, (k+1)/10]` containing `u`, as `k`.
pub fn bucket_index(u: f64) -> usize {
    ((u * 10.0).ceil() as i64 - 1).clamp(0, 9) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub lower: f64,
    pub upper: f64,
    pub model: ModelLabel,
    pub count: usize,
    pub mean_average_power: f64,
}

/// Mean average idle power per (utilisation bucket, model), empty buckets
/// omitted.
pub fn bucket_summaries(records: &[BenchmarkRecord]) -> Vec<BucketSummary> {
    let mut acc = [[(0usize, 0.0f64); 4]; 10];
    for r in records {
        let slot = &mut acc[bucket_index(r.utilization)][r.model as usize];
        slot.0 += 1;
        slot.1 += r.average_power;
    }
    let mut out = Vec::new();
    for (k, row) in acc.iter().enumerate() {
        for (m, &(count, sum)) in row.iter().enumerate() {
            if count > 0 {
                out.push(BucketSummary {
                    lower: k as f64 / 10.0,
                    upper: (k + 1) as f64 / 10.0,
                    model: ModelLabel::ALL[m],
                    count,
                    mean_average_power: sum / count as f64,
                });
            }
        }
    }
    out
}

pub fn write_records<W: Write>(mut w: W, records: &[BenchmarkRecord], comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "instance,n,utilization,model,energy,average_power,wall_time_s")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.instance_id, r.n, r.utilization, r.model, r.energy, r.average_power, r.wall_time
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bucket_summaries<W: Write>(mut w: W, buckets: &[BucketSummary], comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "utilization_low,utilization_high,model,count,mean_average_power")?;
    for b in buckets {
        writeln!(w, "{},{},{},{},{}", b.lower, b.upper, b.model, b.count, b.mean_average_power)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, GeneratorConfig};

    #[test]
    fn buckets_are_half_open_on_the_left() {
        assert_eq!(bucket_index(0.1), 0);
        assert_eq!(bucket_index(0.1000001), 1);
        assert_eq!(bucket_index(0.2), 1);
        assert_eq!(bucket_index(1.0), 9);
        assert_eq!(bucket_index(0.0), 0);
    }

    #[test]
    fn labels_round_trip() {
        for m in ModelLabel::ALL {
            assert_eq!(m.as_str().parse::<ModelLabel>().unwrap(), m);
        }
        assert!("G_800".parse::<ModelLabel>().is_err());
    }

    #[test]
    fn small_benchmark_is_deterministic_and_dominated() {
        let instances: Vec<(String, Instance)> = (0..4)
            .map(|k| (format!("i{k}"), generate_instance(&GeneratorConfig::new(8, 0.5, 1.0, 100 + k)).unwrap()))
            .collect();
        let horizon = instances.iter().map(|(_, i)| i.horizon()).max().unwrap();
        let models = BenchmarkModels::new(&BilinearFurnaceModel::case_study(), horizon as f64).unwrap();
        let a = run_benchmark(&instances, &models, Some(2)).unwrap();
        let b = run_benchmark(&instances, &models, Some(1)).unwrap();
        assert_eq!(a.len(), 16);
        let strip =
            |v: &[BenchmarkRecord]| v.iter().map(|r| (r.instance_id.clone(), r.model, r.energy)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let p_max = models.furnace.trim_power(models.furnace.x0).unwrap();
        for chunk in a.chunks(4) {
            assert_eq!(chunk[0].model, ModelLabel::Continuous);
            for r in &chunk[1..] {
                assert!(chunk[0].energy <= r.energy * (1.0 + 1e-9));
            }
            for r in chunk {
                assert!(r.average_power >= 0.0 && r.average_power <= p_max * (1.0 + 1e-9));
            }
        }
        let buckets = bucket_summaries(&a);
        assert_eq!(buckets.iter().map(|b| b.count).sum::<usize>(), 16);
    }
}

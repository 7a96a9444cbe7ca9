use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use idlesched::baseline::{average_idle_power, dp_solve};
use idlesched::bench::{self, BenchmarkModels};
use idlesched::energy::{check_concavity, ConcavityVerdict};
use idlesched::furnace::{identify, mape, BilinearFurnaceModel};
use idlesched::instances::{generate_instance, GeneratorConfig, Instance};
use idlesched::scheduler::{build_energy_graph, solve};
use idlesched::{io as fio, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "idlesched", version, about = "Minimum idle-energy scheduling with a furnace energy model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instance files.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        p_min: i64,
        #[arg(long, default_value_t = 300)]
        p_max: i64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compute an optimal schedule for one instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Piecewise-linear idle energy function (`delta,energy`).
        #[arg(long, group = "source")]
        function: Option<PathBuf>,
        /// Use the furnace idle energy function.
        #[arg(long, group = "source")]
        furnace: bool,
        /// Transition graph file, solved with the time-indexed DP.
        #[arg(long, group = "source")]
        graph: Option<PathBuf>,
        /// Grid step for the transition-graph DP.
        #[arg(long, default_value_t = 1)]
        step: i64,
        /// Schedule output (stdout summary only when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the energy graph edge list here.
        #[arg(long)]
        dump_graph: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Simulate the energy-optimal control over one idle period.
    Simulate {
        #[arg(long)]
        t_f: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Tabulate the furnace idle energy function.
    Tabulate {
        #[arg(long)]
        t_f_max: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit model parameters to a measured series.
    Identify {
        #[arg(long)]
        measurements: PathBuf,
        /// Samples per local polynomial fit (odd).
        #[arg(long, default_value_t = 9)]
        window: usize,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare the continuous model with transition graphs on a directory of instances.
    Benchmark {
        #[arg(long)]
        instance_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-utilisation-bucket means (defaults to `<out stem>_buckets.csv`).
        #[arg(long)]
        buckets: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Args, Clone, Copy)]
struct ModelArgs {
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_BETA)]
    beta: f64,
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_RHO)]
    rho: f64,
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_U_MAX)]
    u_max: f64,
    /// Operating temperature in °C.
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_OPERATING)]
    operating: f64,
    /// Ambient temperature in °C.
    #[arg(long, default_value_t = BilinearFurnaceModel::CASE_AMBIENT)]
    ambient: f64,
}

impl ModelArgs {
    fn model(&self) -> idlesched::Result<BilinearFurnaceModel> {
        BilinearFurnaceModel::new(
            self.alpha,
            self.beta,
            self.rho,
            self.u_max,
            self.operating - self.ambient,
            self.ambient,
        )
    }

    fn describe(&self) -> String {
        format!(
            "alpha={} beta={} rho={} u_max={} operating={} ambient={}",
            self.alpha, self.beta, self.rho, self.u_max, self.operating, self.ambient
        )
    }
}

fn header(command: &str, params: String) -> Vec<String> {
    vec![format!("idlesched {VERSION} {command}"), params]
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fio::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let file = fio::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    fio::read_instance(file).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { n, gamma, delta, count, seed, p_min, p_max, out_dir } => {
            fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            for k in 0..count {
                let s = seed + k as u64;
                let config = GeneratorConfig { n, p_min, p_max, gamma, delta, seed: s };
                let inst = generate_instance(&config)?;
                let path = out_dir.join(format!("instance_{k:04}.csv"));
                let params = format!("seed={s} n={n} gamma={gamma} delta={delta} p_min={p_min} p_max={p_max}");
                fio::write_instance(fio::create(&path)?, &inst, &header("generate", params))?;
            }
        }
        Command::Solve { instance, function, furnace, graph, step, out, dump_graph, model } => {
            let inst = read_instance(&instance)?.propagate_windows()?;
            let started = Instant::now();
            let (schedule, energy) = if let Some(path) = &function {
                let f = fio::read_energy_function(fio::open(path)?)
                    .with_context(|| format!("reading {}", path.display()))?;
                if let Some(p) = &dump_graph {
                    fs::write(p, build_energy_graph(&inst, &f)?.dump())?;
                }
                let sol = solve(&inst, &f)?;
                let check = inst.total_idle_energy(&sol.schedule, &f)?;
                ensure_round_trip(sol.energy, check)?;
                (sol.schedule, sol.energy)
            } else if furnace {
                let f = model.model()?.energy_function()?;
                if let Some(p) = &dump_graph {
                    fs::write(p, build_energy_graph(&inst, &f)?.dump())?;
                }
                let sol = solve(&inst, &f)?;
                ensure_round_trip(sol.energy, inst.total_idle_energy(&sol.schedule, &f)?)?;
                (sol.schedule, sol.energy)
            } else if let Some(path) = &graph {
                let g = fio::read_transition_graph(fio::open(path)?)
                    .with_context(|| format!("reading {}", path.display()))?;
                let sol = dp_solve(&inst, &g, step)?;
                (sol.schedule, sol.energy)
            } else {
                bail!(Error::InvalidArgument("one of --function, --furnace or --graph is required".into()));
            };
            let elapsed = started.elapsed().as_secs_f64();
            if let Some(path) = &out {
                let params = format!("instance={} energy={energy}", instance.display());
                fio::write_schedule(fio::create(path)?, &schedule, &header("solve", params))?;
            }
            let p_bar = match average_idle_power(&inst, energy) {
                Ok(p) => p.to_string(),
                Err(Error::FullyUtilised) => String::new(),
                Err(e) => return Err(e.into()),
            };
            println!("energy,average_power,wall_time_s");
            println!("{energy},{p_bar},{elapsed}");
        }
        Command::Simulate { t_f, step, out, model } => {
            let m = model.model()?;
            m.check_admissible()?;
            let tr = m.simulate_idle_period(t_f, step)?;
            let params = format!("t_f={t_f} step={step} {}", model.describe());
            fio::write_trajectory(output(&out)?, &tr, m.ambient, &header("simulate", params))?;
        }
        Command::Tabulate { t_f_max, step, out, model } => {
            let m = model.model()?;
            m.check_admissible()?;
            let f = m.tabulate(t_f_max, step)?;
            match check_concavity(&f, step, t_f_max) {
                ConcavityVerdict::Ok => {}
                ConcavityVerdict::NotConcave { at } | ConcavityVerdict::Decreasing { at } => {
                    bail!(Error::NonConcaveFunction { at })
                }
            }
            let params = format!("t_f_max={t_f_max} step={step} {}", model.describe());
            fio::write_energy_function(output(&out)?, &f, &header("tabulate", params))?;
        }
        Command::Identify { measurements, window, degree, model } => {
            let series = fio::read_measurements(fio::open(&measurements)?)
                .with_context(|| format!("reading {}", measurements.display()))?;
            let base = model.model()?;
            let fit = identify(&series, base.ambient, window, degree)?;
            let fitted = fit.into_model(&base);
            let err = mape(&fitted, &series)?;
            println!("alpha,beta,rho,mape_percent");
            println!("{},{},{},{}", fit.alpha, fit.beta, fit.rho, err);
        }
        Command::Benchmark { instance_dir, out, buckets, workers, model } => {
            let mut files: Vec<PathBuf> = fs::read_dir(&instance_dir)
                .with_context(|| format!("cannot read {}", instance_dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            let instances = files
                .iter()
                .map(|p| {
                    let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok((id, read_instance(p)?))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let max_h = instances.iter().map(|(_, i)| i.horizon()).max().unwrap_or(1);
            let models = BenchmarkModels::new(&model.model()?, max_h as f64)?;
            let records = bench::run_benchmark(&instances, &models, workers)?;
            let params =
                format!("instance_dir={} instances={} {}", instance_dir.display(), instances.len(), model.describe());
            bench::write_records(fio::create(&out)?, &records, &header("benchmark", params.clone()))?;
            let bucket_path = buckets.unwrap_or_else(|| {
                let stem = out.file_stem().unwrap_or_default().to_string_lossy();
                out.with_file_name(format!("{stem}_buckets.csv"))
            });
            bench::write_bucket_summaries(
                fio::create(&bucket_path)?,
                &bench::bucket_summaries(&records),
                &header("benchmark", params),
            )?;
        }
    }
    Ok(())
}

fn ensure_round_trip(reported: f64, recomputed: f64) -> anyhow::Result<()> {
    if (reported - recomputed).abs() > 1e-9 * (1.0 + reported.abs()) {
        bail!("schedule energy {recomputed} disagrees with solver energy {reported}");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::InfeasibleOrder { .. } | Error::NoPath) => 2,
        Some(
            Error::Parse(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::InvalidTask { .. }
            | Error::InvalidSchedule(_)
            | Error::InvalidArgument(_)
            | Error::TooLarge(_)
            | Error::NotATaskVertex
            | Error::NonConcaveFunction { .. }
            | Error::NonConcaveInduced { .. },
        ) => 3,
        Some(_) => 4,
        None if err.chain().any(|e| e.downcast_ref::<io::Error>().is_some()) => 3,
        None => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

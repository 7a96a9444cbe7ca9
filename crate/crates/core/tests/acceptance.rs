//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints its `criterion N: PASS|FAIL ...` line, one after the
//! other, with no concurrent work disturbing the timings. The process exits
//! non-zero if a criterion fails, except where a criterion names a narrower
//! hard gate (criterion 7): there the line reports the full verdict and only
//! the gate decides the exit status.

use std::panic;
use std::time::{Duration, Instant};

use idlesched::baseline::{derive_transition_graph, dp_solve};
use idlesched::bench::{bucket_index, run_benchmark, BenchmarkModels, ModelLabel};
use idlesched::energy::{check_concavity, IdleEnergyFunction, Linear, PiecewiseLinearConcave};
use idlesched::furnace::{fit_parameters, BilinearFurnaceModel, ControlSegment, DerivativeSample};
use idlesched::instances::{generate_instance, GeneratorConfig, Instance, Schedule, Task};
use idlesched::scheduler::{
    block_has_support, blocks, brute_force_solve, build_energy_graph, is_block_form, normalize_to_block_form,
    shortest_path, solve, EdgeKind, SupportVertex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn report(id: u32, pass: bool, detail: String) {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

/// Prints the verdict on the whole criterion but only fails the test when
/// `gate` (the part declared as the hard gate) does not hold.
fn report_gated(id: u32, pass: bool, gate: bool, detail: String) {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(gate, "criterion {id} gate failed: {detail}");
}

fn table1() -> Instance {
    Instance::from_triples(&[(0, 20, 10), (15, 40, 15), (45, 70, 5), (80, 100, 10)]).unwrap()
}

/// Random instance with at most `max_n` tasks whose propagated horizon is at
/// most `max_horizon`.
fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_horizon: i64) -> Instance {
    loop {
        let n = rng.random_range(1..=max_n);
        let mut r = rng.random_range(0..10);
        let mut tasks = Vec::with_capacity(n);
        for _ in 0..n {
            r += rng.random_range(0..30);
            let p = rng.random_range(1..=15);
            let slack = rng.random_range(0..60);
            tasks.push(Task::new(r, r + p + slack, p));
            r += p;
        }
        if let Ok(inst) = Instance::new(tasks).and_then(|i| i.propagate_windows()) {
            if inst.horizon() <= max_horizon {
                return inst;
            }
        }
    }
}

/// Concave piecewise-linear function with slopes on a 1/8 grid, so that its
/// values at integer arguments are exact binary fractions.
fn random_concave(rng: &mut ChaCha8Rng) -> PiecewiseLinearConcave {
    let segments = rng.random_range(1..=5);
    let mut slopes: Vec<f64> = (0..segments).map(|_| rng.random_range(0..=80) as f64 / 8.0).collect();
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut pts = vec![(0.0, 0.0)];
    for s in slopes {
        let (x, y) = *pts.last().unwrap();
        let len = rng.random_range(1..=40) as f64;
        pts.push((x + len, y + s * len));
    }
    PiecewiseLinearConcave::new(pts).unwrap()
}

/// Feasible starts drawn uniformly inside the remaining window of each task,
/// snapped to integers half of the time.
fn random_valid_schedule(inst: &Instance, rng: &mut ChaCha8Rng) -> Schedule {
    let mut starts = Vec::with_capacity(inst.len());
    let mut earliest = f64::NEG_INFINITY;
    for t in inst.tasks() {
        let lo = earliest.max(t.release as f64);
        let hi = t.latest_start() as f64;
        let mut s = lo + rng.random_range(0.0..=1.0) * (hi - lo);
        if rng.random_bool(0.5) {
            s = s.floor().max(lo);
        }
        starts.push(s);
        earliest = s + t.processing as f64;
    }
    Schedule::new(starts)
}

fn min_time<T>(runs: usize, mut f: impl FnMut() -> T) -> Duration {
    (0..runs)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn criterion_01_worked_example() {
    use SupportVertex::*;
    let inst = table1().propagate_windows().unwrap();
    let f = Linear::identity();

    // edges derived by hand from the packing rules, 0-based tasks
    let mut want = vec![
        (Source, Release(0), None),
        (Source, Deadline(0), None),
        (Source, Release(1), None),
        (Release(0), Release(1), Some(5)),
        (Release(0), Deadline(1), Some(15)),
        (Deadline(0), Deadline(1), Some(5)),
        (Deadline(0), Release(2), Some(10)),
        (Deadline(0), Deadline(2), Some(30)),
        (Release(1), Release(2), Some(15)),
        (Release(1), Deadline(2), Some(35)),
        (Deadline(1), Release(2), Some(5)),
        (Deadline(1), Deadline(2), Some(25)),
        (Release(2), Release(3), Some(30)),
        (Release(2), Deadline(3), Some(40)),
        (Deadline(2), Release(3), Some(10)),
        (Deadline(2), Deadline(3), Some(20)),
        (Release(3), Sink, None),
        (Deadline(3), Sink, None),
    ];
    let graph = build_energy_graph(&inst, &f).unwrap();
    let mut got: Vec<_> = graph
        .edges()
        .iter()
        .map(|e| {
            let gap = match e.kind {
                EdgeKind::Between { gap, .. } => Some(gap),
                _ => None,
            };
            (graph.vertex(e.from), graph.vertex(e.to), gap)
        })
        .collect();
    got.sort();
    want.sort();
    let structure_ok = got == want && graph.find_edge(Source, Release(2)).is_none();

    let _ = solve(&inst, &f).unwrap(); // warm-up
    let started = Instant::now();
    let sol = solve(&inst, &f).unwrap();
    let elapsed = started.elapsed();

    let path = shortest_path(&graph).unwrap();
    let path_ok = path.vertices(&graph) == vec![Source, Deadline(0), Release(2), Release(3), Sink];
    let gaps = inst.idle_gaps(&sol.schedule);
    let s = sol.schedule.starts();
    let gaps_ok = gaps == vec![0.0, 10.0, 30.0] && s[1] + 15.0 == 35.0 && s[2] + 5.0 == 50.0;
    let pass = structure_ok
        && path_ok
        && sol.energy == 40.0
        && s == [10.0, 20.0, 45.0, 80.0]
        && gaps_ok
        && elapsed < Duration::from_millis(1);
    report(
        1,
        pass,
        format!(
            "energy={} schedule={:?} edges={} structure_ok={structure_ok} path_ok={path_ok} time={:?}",
            sol.energy,
            s,
            graph.edges().len(),
            elapsed
        ),
    );
}

fn criterion_02_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let furnace = BilinearFurnaceModel::case_study().tabulate(200.0, 1.0).unwrap();
    let started = Instant::now();
    let total = 600;
    let mut mismatches = Vec::new();
    for k in 0..total {
        let inst = random_instance(&mut rng, 6, 200);
        let (fast, slow) = match k % 3 {
            0 => {
                let f = Linear::identity();
                (solve(&inst, &f).unwrap().energy, brute_force_solve(&inst, &f).unwrap().energy)
            }
            1 => {
                let f = random_concave(&mut rng);
                (solve(&inst, &f).unwrap().energy, brute_force_solve(&inst, &f).unwrap().energy)
            }
            _ => (solve(&inst, &furnace).unwrap().energy, brute_force_solve(&inst, &furnace).unwrap().energy),
        };
        if fast != slow {
            mismatches.push((k, fast, slow));
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(60);
    report(
        2,
        pass,
        format!(
            "instances={total} exact_mismatches={} first={:?} time={elapsed:?}",
            mismatches.len(),
            mismatches.first()
        ),
    );
}

fn criterion_03_trim_power() {
    let m = BilinearFurnaceModel::case_study();
    let hot = m.trim_power(925.0).unwrap();
    let warm = m.trim_power(565.0).unwrap();
    let pass = (hot - 40.22).abs() <= 0.01
        && (warm - 17.72).abs() <= 0.01
        && ((hot - 40.0) / 40.0).abs() < 0.1
        && ((warm - 18.0) / 18.0).abs() < 0.1;
    report(3, pass, format!("P(960C)={hot:.4} kW P(600C)={warm:.4} kW"));
}

fn criterion_04_boundary_condition() {
    let m = BilinearFurnaceModel::case_study();
    let started = Instant::now();
    let mut worst_state = 0.0f64;
    let mut worst_residual = 0.0f64;
    for k in 0..50 {
        let t_f = 1.0 + 1999.0 * k as f64 / 49.0;
        let t_sw = m.switching_time(t_f).unwrap();
        worst_residual = worst_residual.max(m.switching_residual(t_f, t_sw).abs());
        let tr = m.simulate_idle_period(t_f, 1.0).unwrap();
        worst_state = worst_state.max(((tr.final_state() - m.x0) / m.x0).abs());
    }
    let elapsed = started.elapsed();
    let pass = worst_state <= 1e-6 && worst_residual < 1e-9 && elapsed < Duration::from_secs(1);
    report(
        4,
        pass,
        format!("max_rel_state_error={worst_state:.3e} max_residual={worst_residual:.3e} time={elapsed:?}"),
    );
}

fn criterion_05_concavity_and_slopes() {
    let m = BilinearFurnaceModel::case_study();
    let started = Instant::now();
    let horizon = 20000.0;
    let f = m.tabulate(horizon, 1.0).unwrap();
    let concave = check_concavity(&f, 1.0, horizon).is_ok();
    let mut increasing = true;
    let mut below_envelope = true;
    let mut prev = f.energy(0.0);
    for k in 1..=horizon as usize {
        let x = k as f64;
        let y = f.energy(x);
        increasing &= y > prev;
        below_envelope &= y <= 40.23 * x;
        prev = y;
    }
    // random off-grid probes
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let a: f64 = rng.random_range(0.0..horizon);
        let b: f64 = rng.random_range(0.0..horizon);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if hi > lo {
            increasing &= f.energy(hi) > f.energy(lo);
        }
        below_envelope &= f.energy(hi) <= 40.23 * hi;
    }
    let bound = m.full_reheat_energy().unwrap();
    let tail_rel = (f.energy(horizon) - bound).abs() / bound;
    let elapsed = started.elapsed();
    let pass = concave && increasing && below_envelope && tail_rel <= 1e-3 && elapsed < Duration::from_secs(1);
    report(
        5,
        pass,
        format!(
            "concave={concave} strictly_increasing={increasing} below_40.23x={below_envelope} E({horizon})={:.4} bound={bound:.4} rel={tail_rel:.2e} time={elapsed:?}",
            f.energy(horizon)
        ),
    );
}

fn criterion_06_derivative_identity() {
    let m = BilinearFurnaceModel::case_study();
    let mut worst = 0.0f64;
    let mut in_unit = true;
    for k in 0..100 {
        let t_f = 1.0 + 1999.0 * k as f64 / 99.0;
        let h = 1e-3 * t_f.max(1.0);
        let fd = (m.switching_time(t_f + h).unwrap() - m.switching_time(t_f - h).unwrap()) / (2.0 * h);
        let d = m.switching_time_derivative(m.switching_time(t_f).unwrap());
        worst = worst.max(((d - fd) / fd).abs());
        in_unit &= d > 0.0 && d < 1.0;
    }
    report(6, worst <= 1e-4 && in_unit, format!("max_rel_error={worst:.3e} all_in_(0,1)={in_unit}"));
}

fn criterion_07_dominance() {
    let started = Instant::now();
    let mut instances = Vec::new();
    let mut seed = 7000u64;
    for n in [30usize, 50] {
        for gamma in [0.2, 1.0, 3.0] {
            for delta in [0.2, 1.0, 3.0] {
                for k in 0..10 {
                    let inst = generate_instance(&GeneratorConfig::new(n, gamma, delta, seed)).unwrap();
                    instances.push((format!("n{n}_g{gamma}_d{delta}_{k:02}"), inst));
                    seed += 1;
                }
            }
        }
    }
    let max_h = instances.iter().map(|(_, i)| i.horizon()).max().unwrap();
    let models = BenchmarkModels::new(&BilinearFurnaceModel::case_study(), max_h as f64).unwrap();
    let records = run_benchmark(&instances, &models, None).unwrap();

    let mut violations = 0;
    let mut worst_excess = 0.0f64;
    for chunk in records.chunks(4) {
        assert_eq!(chunk[0].model, ModelLabel::Continuous);
        for r in &chunk[1..] {
            if chunk[0].average_power > r.average_power {
                worst_excess = worst_excess.max((chunk[0].average_power - r.average_power) / r.average_power);
                if chunk[0].average_power > r.average_power * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
        }
    }
    let lowest = records.iter().map(|r| bucket_index(r.utilization)).min().unwrap();
    let mean = |label| {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.model == label && bucket_index(r.utilization) == lowest)
            .map(|r| r.average_power)
            .collect();
        (v.iter().sum::<f64>() / v.len() as f64, v.len())
    };
    let (cont, count) = mean(ModelLabel::Continuous);
    let (both, _) = mean(ModelLabel::G600700);
    let elapsed = started.elapsed();
    let gate = violations == 0 && elapsed < Duration::from_secs(300);
    let pass = gate && cont < 0.5 * both;
    report_gated(
        7,
        pass,
        gate,
        format!(
            "dominance_gate={} bucket_ratio_below_0.5={} instances={} violations={violations} worst_float_excess={worst_excess:.1e} lowest_bucket=({:.1},{:.1}] count={count} mean_P(E_cont)={cont:.3} mean_P(G_600_700)={both:.3} ratio={:.3} time={elapsed:?}",
            if gate { "ok" } else { "violated" },
            cont < 0.5 * both,
            instances.len(),
            lowest as f64 / 10.0,
            (lowest + 1) as f64 / 10.0,
            cont / both
        ),
    );
}

/// Tasks released back to back with one common deadline: every pair of
/// supports is joined by an edge and every packing scan runs to the end.
fn dense_instance(n: usize, scale: i64) -> Instance {
    let mut tasks = Vec::with_capacity(n);
    let mut r = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let ps: Vec<i64> = (0..n).map(|_| rng.random_range(1..=10)).collect();
    let total: i64 = ps.iter().sum();
    for &p in &ps {
        tasks.push(Task::new(r * scale, (total + total / 2) * scale, p * scale));
        r += p;
    }
    Instance::new(tasks).unwrap().propagate_windows().unwrap()
}

fn criterion_08_complexity_contrast() {
    let f = PiecewiseLinearConcave::new(vec![(0.0, 0.0), (100.0, 4000.0), (1000.0, 13000.0), (1e6, 1e6)]).unwrap();

    let sizes = [250usize, 500, 1000];
    let times: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let inst = dense_instance(n, 1);
            min_time(3, || solve(&inst, &f).unwrap()).as_secs_f64()
        })
        .collect();
    // least-squares fit of t = c n^3 in log space
    let log_c = sizes.iter().zip(&times).map(|(&n, &t)| t.ln() - 3.0 * (n as f64).ln()).sum::<f64>() / 3.0;
    let cubic_ok = sizes.iter().zip(&times).all(|(&n, &t)| {
        let ratio = t / (log_c.exp() * (n as f64).powi(3));
        (1.0 / 1.5..=1.5).contains(&ratio)
    });

    let base = dense_instance(500, 1);
    let stretched = dense_instance(500, 10);
    let t_base = min_time(3, || solve(&base, &f).unwrap()).as_secs_f64();
    let t_stretch = min_time(3, || solve(&stretched, &f).unwrap()).as_secs_f64();
    let horizon_change = (t_stretch - t_base).abs() / t_base;
    let same_energy = solve(&stretched, &f).unwrap().energy.is_finite();

    let g = derive_transition_graph(&BilinearFurnaceModel::case_study(), &[600.0, 700.0]).unwrap();
    let dp_instance = |scale: i64| {
        let tasks: Vec<Task> =
            (0..20).map(|i| Task::new(i * 40 * scale, (i * 40 + 1200) * scale, 20 * scale)).collect();
        Instance::new(tasks).unwrap().propagate_windows().unwrap()
    };
    let (d1, d2) = (dp_instance(1), dp_instance(2));
    let t_dp1 = min_time(3, || dp_solve(&d1, &g, 1).unwrap()).as_secs_f64();
    let t_dp2 = min_time(3, || dp_solve(&d2, &g, 1).unwrap()).as_secs_f64();
    let dp_ratio = t_dp2 / t_dp1;

    let pass = cubic_ok && horizon_change < 0.2 && same_energy && (2.0..=6.0).contains(&dp_ratio) && times[2] < 5.0;
    report(
        8,
        pass,
        format!(
            "solve n=250/500/1000: {:.4}s/{:.4}s/{:.4}s cubic_fit_ok={cubic_ok}; x10 horizon: {t_base:.4}s -> {t_stretch:.4}s ({:+.1}%); dp x2 horizon: {t_dp1:.4}s -> {t_dp2:.4}s (x{dp_ratio:.2})",
            times[0],
            times[1],
            times[2],
            100.0 * (t_stretch - t_base) / t_base
        ),
    );
}

fn criterion_09_identification() {
    let m = BilinearFurnaceModel::case_study();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.01).unwrap();
    // states along a trajectory with varied heating
    let segments: Vec<ControlSegment> = (0..40)
        .map(|k| {
            ControlSegment::new(
                rng.random_range(10.0..60.0),
                if k % 3 == 0 { 0.0 } else { rng.random_range(0.0..160.0) },
            )
        })
        .collect();
    let tr = m.simulate(m.x0, &segments, 2.0).unwrap();
    let samples: Vec<DerivativeSample> = tr
        .points
        .iter()
        .map(|p| {
            let exact = -m.alpha * p.x + m.beta * p.power - m.rho * p.x * p.power;
            DerivativeSample { x: p.x, x_dot: exact * (1.0 + noise.sample(&mut rng)), u: p.power }
        })
        .collect();
    let fit = fit_parameters(&samples).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let errs = [rel(fit.alpha, m.alpha), rel(fit.beta, m.beta), rel(fit.rho, m.rho)];
    let pass = errs.iter().all(|&e| e < 0.05);
    report(
        9,
        pass,
        format!(
            "samples={} alpha={:.6e} ({:.2}%) beta={:.6e} ({:.2}%) rho={:.6e} ({:.2}%)",
            samples.len(),
            fit.alpha,
            100.0 * errs[0],
            fit.beta,
            100.0 * errs[1],
            fit.rho,
            100.0 * errs[2]
        ),
    );
}

fn criterion_10_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let furnace = BilinearFurnaceModel::case_study().energy_function().unwrap();
    let mut failures = Vec::new();
    for k in 0..1000 {
        let inst = random_instance(&mut rng, 8, 400);
        let schedule = random_valid_schedule(&inst, &mut rng);
        assert!(inst.validate_schedule(&schedule));
        let f: Box<dyn IdleEnergyFunction> = match k % 3 {
            0 => Box::new(Linear::identity()),
            1 => Box::new(random_concave(&mut rng)),
            _ => Box::new(furnace),
        };
        let before = inst.total_idle_energy(&schedule, &f).unwrap();
        let out = match normalize_to_block_form(&inst, &schedule, &f) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("#{k}: {e}"));
                continue;
            }
        };
        let after = inst.total_idle_energy(&out, &f).unwrap();
        let valid = inst.validate_schedule(&out);
        let supported = blocks(&inst, &out).iter().all(|b| block_has_support(&inst, &out, b));
        if !(valid && supported && is_block_form(&inst, &out) && after <= before + 1e-9 * (1.0 + before)) {
            failures.push(format!("#{k}: valid={valid} supported={supported} before={before} after={after}"));
        }
    }
    report(10, failures.is_empty(), format!("pairs=1000 failures={} first={:?}", failures.len(), failures.first()));
}

fn main() {
    let criteria: [(&str, fn()); 10] = [
        ("worked example", criterion_01_worked_example),
        ("oracle equivalence", criterion_02_oracle_equivalence),
        ("trim power", criterion_03_trim_power),
        ("boundary condition", criterion_04_boundary_condition),
        ("concavity and slopes", criterion_05_concavity_and_slopes),
        ("derivative identity", criterion_06_derivative_identity),
        ("dominance", criterion_07_dominance),
        ("complexity contrast", criterion_08_complexity_contrast),
        ("identification", criterion_09_identification),
        ("normalization", criterion_10_normalization),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if panic::catch_unwind(run).is_err() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gates hold");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}

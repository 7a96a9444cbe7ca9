//! Python bindings. Start times travel as lists of floats and tasks as
//! `(release, deadline, processing)` tuples.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use idlesched::baseline::{self, TransitionGraph};
use idlesched::energy::{self, IdleEnergyFunction, Linear, PiecewiseLinearConcave};
use idlesched::furnace::{self, BilinearFurnaceModel, DerivativeSample, FurnaceEnergy};
use idlesched::instances::{self, GeneratorConfig, Instance, Schedule};
use idlesched::scheduler;

create_exception!(idlesched, SchedulingError, PyValueError);

fn py_err(e: idlesched::Error) -> PyErr {
    SchedulingError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for idlesched::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

#[pyclass(name = "Instance", module = "idlesched", skip_from_py_object)]
#[derive(Clone)]
pub struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    fn new(tasks: Vec<(i64, i64, i64)>) -> PyResult<Self> {
        Ok(PyInstance { inner: Instance::from_triples(&tasks).py()? })
    }

    fn tasks(&self) -> Vec<(i64, i64, i64)> {
        self.inner.tasks().iter().map(|t| (t.release, t.deadline, t.processing)).collect()
    }

    /// Copy with release times pushed forward and deadlines pulled back.
    fn propagate(&self) -> PyResult<Self> {
        Ok(PyInstance { inner: self.inner.propagate_windows().py()? })
    }

    #[getter]
    fn horizon(&self) -> i64 {
        self.inner.horizon()
    }

    fn utilization(&self) -> PyResult<f64> {
        self.inner.utilization().py()
    }

    fn is_valid_schedule(&self, starts: Vec<f64>) -> bool {
        self.inner.validate_schedule(&Schedule::new(starts))
    }

    fn idle_gaps(&self, starts: Vec<f64>) -> Vec<f64> {
        self.inner.idle_gaps(&Schedule::new(starts))
    }

    fn idle_energy(&self, starts: Vec<f64>, f: &PyEnergyFunction) -> PyResult<f64> {
        self.inner.total_idle_energy(&Schedule::new(starts), &f.inner).py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Instance({:?})", self.tasks())
    }
}

#[derive(Clone)]
enum EnergyKind {
    Linear(Linear),
    Piecewise(PiecewiseLinearConcave),
    Furnace(FurnaceEnergy),
}

impl IdleEnergyFunction for EnergyKind {
    fn energy(&self, delta: f64) -> f64 {
        match self {
            EnergyKind::Linear(f) => f.energy(delta),
            EnergyKind::Piecewise(f) => f.energy(delta),
            EnergyKind::Furnace(f) => f.energy(delta),
        }
    }
}

#[pyclass(name = "EnergyFunction", module = "idlesched", skip_from_py_object)]
#[derive(Clone)]
pub struct PyEnergyFunction {
    inner: EnergyKind,
}

#[pymethods]
impl PyEnergyFunction {
    #[staticmethod]
    fn linear(power: f64) -> Self {
        PyEnergyFunction { inner: EnergyKind::Linear(Linear::new(power)) }
    }

    #[staticmethod]
    fn identity() -> Self {
        Self::linear(1.0)
    }

    /// Concave piecewise-linear function through the given `(delta, energy)`
    /// breakpoints, the first of which must be `(0, 0)`.
    #[staticmethod]
    fn piecewise(points: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(PyEnergyFunction { inner: EnergyKind::Piecewise(PiecewiseLinearConcave::new(points).py()?) })
    }

    /// Exact furnace idle energy, one root solve per evaluation.
    #[staticmethod]
    fn furnace(model: &PyFurnaceModel) -> PyResult<Self> {
        Ok(PyEnergyFunction { inner: EnergyKind::Furnace(model.inner.energy_function().py()?) })
    }

    #[staticmethod]
    fn from_transition_graph(graph: &PyTransitionGraph) -> PyResult<Self> {
        Ok(PyEnergyFunction { inner: EnergyKind::Piecewise(energy::from_transition_graph(&graph.inner).py()?) })
    }

    fn __call__(&self, delta: f64) -> PyResult<f64> {
        self.inner.eval(delta).py()
    }

    /// Breakpoints of a piecewise-linear function, `None` otherwise.
    fn breakpoints(&self) -> Option<Vec<(f64, f64)>> {
        match &self.inner {
            EnergyKind::Piecewise(f) => Some(f.breakpoints().collect()),
            _ => None,
        }
    }

    fn is_concave(&self, grid_step: f64, delta_max: f64) -> bool {
        energy::check_concavity(&self.inner, grid_step, delta_max).is_ok()
    }
}

#[pyclass(name = "FurnaceModel", module = "idlesched", skip_from_py_object)]
#[derive(Clone)]
pub struct PyFurnaceModel {
    inner: BilinearFurnaceModel,
}

#[pymethods]
impl PyFurnaceModel {
    #[new]
    #[pyo3(signature = (
        alpha = BilinearFurnaceModel::CASE_ALPHA,
        beta = BilinearFurnaceModel::CASE_BETA,
        rho = BilinearFurnaceModel::CASE_RHO,
        u_max = BilinearFurnaceModel::CASE_U_MAX,
        operating = BilinearFurnaceModel::CASE_OPERATING,
        ambient = BilinearFurnaceModel::CASE_AMBIENT,
    ))]
    fn new(alpha: f64, beta: f64, rho: f64, u_max: f64, operating: f64, ambient: f64) -> PyResult<Self> {
        let inner = BilinearFurnaceModel::new(alpha, beta, rho, u_max, operating - ambient, ambient).py()?;
        Ok(PyFurnaceModel { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn x0(&self) -> f64 {
        self.inner.x0
    }

    fn is_admissible(&self) -> bool {
        self.inner.check_admissible().is_ok()
    }

    /// Constant power holding a temperature given in °C.
    fn trim_power(&self, celsius: f64) -> PyResult<f64> {
        self.inner.trim_power(celsius - self.inner.ambient).py()
    }

    fn switching_time(&self, t_f: f64) -> PyResult<f64> {
        self.inner.switching_time(t_f).py()
    }

    fn switching_time_derivative(&self, t_sw: f64) -> f64 {
        self.inner.switching_time_derivative(t_sw)
    }

    fn idle_energy(&self, t_f: f64) -> PyResult<f64> {
        self.inner.idle_energy(t_f).py()
    }

    fn full_reheat_energy(&self) -> PyResult<f64> {
        self.inner.full_reheat_energy().py()
    }

    /// Rows `(time, temperature °C, power, cumulative energy)`.
    #[pyo3(signature = (t_f, step = 1.0))]
    fn simulate(&self, t_f: f64, step: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let tr = self.inner.simulate_idle_period(t_f, step).py()?;
        Ok(tr.points.iter().map(|p| (p.time, p.x + self.inner.ambient, p.power, p.energy)).collect())
    }

    #[pyo3(signature = (t_f_max, step = 1.0))]
    fn tabulate(&self, t_f_max: f64, step: f64) -> PyResult<PyEnergyFunction> {
        Ok(PyEnergyFunction { inner: EnergyKind::Piecewise(self.inner.tabulate(t_f_max, step).py()?) })
    }
}

#[pyclass(name = "TransitionGraph", module = "idlesched", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTransitionGraph {
    inner: TransitionGraph,
}

#[pymethods]
impl PyTransitionGraph {
    /// Furnace graph with one standby mode per temperature in °C.
    #[staticmethod]
    fn derive(model: &PyFurnaceModel, standby_temps: Vec<f64>) -> PyResult<Self> {
        Ok(PyTransitionGraph { inner: baseline::derive_transition_graph(&model.inner, &standby_temps).py()? })
    }

    fn gap_cost(&self, delta: f64) -> f64 {
        self.inner.gap_cost(delta)
    }

    fn mode_names(&self) -> Vec<String> {
        self.inner.modes().iter().map(|m| m.name.clone()).collect()
    }

    #[getter]
    fn processing_power(&self) -> f64 {
        self.inner.processing_power()
    }
}

/// Optimal schedule for a concave idle energy function: `(starts, energy)`.
#[pyfunction]
fn solve(instance: &PyInstance, f: &PyEnergyFunction) -> PyResult<(Vec<f64>, f64)> {
    let sol = scheduler::solve(&instance.inner, &f.inner).py()?;
    Ok((sol.schedule.into_starts(), sol.energy))
}

/// Exhaustive search over integer start times (small instances only).
#[pyfunction]
fn brute_force_solve(instance: &PyInstance, f: &PyEnergyFunction) -> PyResult<(Vec<f64>, f64)> {
    let sol = scheduler::brute_force_solve(&instance.inner, &f.inner).py()?;
    Ok((sol.schedule.into_starts(), sol.energy))
}

#[pyfunction]
fn min_switches_solve(instance: &PyInstance) -> PyResult<(Vec<f64>, usize)> {
    let (s, count) = scheduler::min_switches_solve(&instance.inner).py()?;
    Ok((s.into_starts(), count))
}

#[pyfunction]
fn normalize_to_block_form(instance: &PyInstance, starts: Vec<f64>, f: &PyEnergyFunction) -> PyResult<Vec<f64>> {
    let s = scheduler::normalize_to_block_form(&instance.inner, &Schedule::new(starts), &f.inner).py()?;
    Ok(s.into_starts())
}

/// Energy graph as text, one edge per line.
#[pyfunction]
fn energy_graph(instance: &PyInstance, f: &PyEnergyFunction) -> PyResult<String> {
    Ok(scheduler::build_energy_graph(&instance.inner, &f.inner).py()?.dump())
}

#[pyfunction]
#[pyo3(signature = (instance, graph, step = 1))]
fn dp_solve(instance: &PyInstance, graph: &PyTransitionGraph, step: i64) -> PyResult<(Vec<f64>, f64)> {
    let sol = baseline::dp_solve(&instance.inner, &graph.inner, step).py()?;
    Ok((sol.schedule.into_starts(), sol.energy))
}

#[pyfunction]
fn average_idle_power(instance: &PyInstance, energy: f64) -> PyResult<f64> {
    baseline::average_idle_power(&instance.inner, energy).py()
}

#[pyfunction]
#[pyo3(signature = (n, gamma, delta, seed, p_min = 1, p_max = 300))]
fn generate_instance(n: usize, gamma: f64, delta: f64, seed: u64, p_min: i64, p_max: i64) -> PyResult<PyInstance> {
    let config = GeneratorConfig { n, p_min, p_max, gamma, delta, seed };
    Ok(PyInstance { inner: instances::generate_instance(&config).py()? })
}

/// Least-squares `(alpha, beta, rho)` from `(x, x_dot, u)` samples.
#[pyfunction]
fn fit_parameters(samples: Vec<(f64, f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let samples: Vec<DerivativeSample> =
        samples.into_iter().map(|(x, x_dot, u)| DerivativeSample { x, x_dot, u }).collect();
    let p = furnace::fit_parameters(&samples).py()?;
    Ok((p.alpha, p.beta, p.rho))
}

#[pymodule]
#[pyo3(name = "idlesched")]
pub fn idlesched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SchedulingError", m.py().get_type::<SchedulingError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyEnergyFunction>()?;
    m.add_class::<PyFurnaceModel>()?;
    m.add_class::<PyTransitionGraph>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_solve, m)?)?;
    m.add_function(wrap_pyfunction!(min_switches_solve, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_to_block_form, m)?)?;
    m.add_function(wrap_pyfunction!(energy_graph, m)?)?;
    m.add_function(wrap_pyfunction!(dp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(average_idle_power, m)?)?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(fit_parameters, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

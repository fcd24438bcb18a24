//! Python bindings. Enum-like arguments are passed as the same strings the
//! command line accepts ("E2", "qm", "eraser", "on-d3", ...).

use std::collections::BTreeMap;
use std::str::FromStr;

use eraser_core::analysis::{self, build_table};
use eraser_core::harness::{self, match_coincidences_with_delay, DetectorPreset, Experiment};
use eraser_core::models::{self, ModelKind};
use eraser_core::quantum::{self, Amplitude, Path, Side, SideOutcome};
use eraser_core::screen::{self, Condition, ScreenGrid};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Table = BTreeMap<(String, String), f64>;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn parse_side(s: &str) -> PyResult<Side> {
    match s.to_ascii_lowercase().as_str() {
        "upper" => Ok(Side::Upper),
        "lower" => Ok(Side::Lower),
        _ => Err(PyValueError::new_err(format!("unknown side '{s}' (expected upper or lower)"))),
    }
}

fn parse_path(n: u8) -> PyResult<Path> {
    match n {
        1 => Ok(Path::One),
        2 => Ok(Path::Two),
        _ => Err(PyValueError::new_err(format!("path must be 1 or 2, got {n}"))),
    }
}

fn table<I: IntoIterator<Item = ((SideOutcome, SideOutcome), f64)>>(items: I) -> Table {
    items
        .into_iter()
        .map(|((u, l), p)| ((u.to_string(), l.to_string()), p))
        .collect()
}

/// Two-photon path state.
#[pyclass(name = "JointState", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyJointState {
    inner: quantum::JointState,
}

#[pymethods]
impl PyJointState {
    /// `amplitudes[upper_path][lower_path]`, paths indexed from 0.
    #[new]
    fn new(amplitudes: [[Amplitude; 2]; 2]) -> PyResult<Self> {
        Ok(Self {
            inner: quantum::JointState::new(amplitudes).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn entangled() -> Self {
        Self {
            inner: quantum::make_entangled_state(),
        }
    }

    #[staticmethod]
    fn basis_state(upper_path: u8, lower_path: u8) -> PyResult<Self> {
        Ok(Self {
            inner: quantum::JointState::basis_state(parse_path(upper_path)?, parse_path(lower_path)?),
        })
    }

    fn amplitudes(&self) -> [[Amplitude; 2]; 2] {
        self.inner.amplitudes()
    }

    fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    fn eraser_rotate(&self, side: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.eraser_rotate(parse_side(side)?),
        })
    }

    fn __repr__(&self) -> String {
        let a = self.inner.amplitudes();
        format!("JointState([[{}, {}], [{}, {}]])", a[0][0], a[0][1], a[1][0], a[1][1])
    }
}

/// Double-slit geometry in meters.
#[pyclass(name = "SlitGeometry", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PySlitGeometry {
    slit_width: f64,
    slit_separation: f64,
    wavelength: f64,
    screen_distance: f64,
    envelope_shift: f64,
}

impl PySlitGeometry {
    fn core(&self) -> screen::SlitGeometry {
        screen::SlitGeometry {
            slit_width: self.slit_width,
            slit_separation: self.slit_separation,
            wavelength: self.wavelength,
            screen_distance: self.screen_distance,
            envelope_shift: self.envelope_shift,
        }
    }

    fn checked(&self) -> PyResult<screen::SlitGeometry> {
        let g = self.core();
        g.validate().map_err(value_err)?;
        Ok(g)
    }
}

impl From<screen::SlitGeometry> for PySlitGeometry {
    fn from(g: screen::SlitGeometry) -> Self {
        Self {
            slit_width: g.slit_width,
            slit_separation: g.slit_separation,
            wavelength: g.wavelength,
            screen_distance: g.screen_distance,
            envelope_shift: g.envelope_shift,
        }
    }
}

#[pymethods]
impl PySlitGeometry {
    #[new]
    #[pyo3(signature = (slit_width=None, slit_separation=None, wavelength=None, screen_distance=None, envelope_shift=None))]
    fn new(
        slit_width: Option<f64>,
        slit_separation: Option<f64>,
        wavelength: Option<f64>,
        screen_distance: Option<f64>,
        envelope_shift: Option<f64>,
    ) -> PyResult<Self> {
        let d = screen::SlitGeometry::default();
        let g = screen::SlitGeometry {
            slit_width: slit_width.unwrap_or(d.slit_width),
            slit_separation: slit_separation.unwrap_or(d.slit_separation),
            wavelength: wavelength.unwrap_or(d.wavelength),
            screen_distance: screen_distance.unwrap_or(d.screen_distance),
            envelope_shift: envelope_shift.unwrap_or(d.envelope_shift),
        };
        g.validate().map_err(value_err)?;
        Ok(g.into())
    }

    fn fringe_period(&self) -> PyResult<f64> {
        Ok(self.checked()?.fringe_period())
    }

    fn envelope_zero(&self) -> PyResult<f64> {
        Ok(self.checked()?.envelope_zero())
    }

    fn __repr__(&self) -> String {
        format!(
            "SlitGeometry(slit_width={}, slit_separation={}, wavelength={}, screen_distance={}, envelope_shift={})",
            self.slit_width, self.slit_separation, self.wavelength, self.screen_distance, self.envelope_shift
        )
    }
}

/// Born-rule table `{(upper, lower): probability}`.
#[pyfunction]
fn joint_distribution(state: &PyJointState, upper_basis: &str, lower_basis: &str) -> PyResult<Table> {
    let t = quantum::joint_distribution(&state.inner, parse(upper_basis)?, parse(lower_basis)?).map_err(value_err)?;
    Ok(table(t))
}

/// `{outcome: probability}` for one photon through the bomb tester.
#[pyfunction]
fn bomb_probabilities(bomb_live: bool) -> BTreeMap<String, f64> {
    quantum::bomb_probabilities(bomb_live)
        .into_iter()
        .map(|(o, p)| (format!("{o:?}"), p))
        .collect()
}

/// Normalized screen pattern as `(xs, intensity)`.
#[pyfunction]
#[pyo3(signature = (condition, geometry=None))]
fn conditioned_pattern(condition: &str, geometry: Option<&PySlitGeometry>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let g = geometry.map_or(Ok(screen::SlitGeometry::default()), |g| g.checked())?;
    let p = screen::conditioned_pattern(&g, parse(condition)?).map_err(value_err)?;
    Ok((p.xs, p.intensity))
}

/// Fringe visibility of the conditioned pattern over `|x| ≤ window/2`
/// (default: the central diffraction lobe).
#[pyfunction]
#[pyo3(signature = (condition, geometry=None, window=None))]
fn visibility(condition: &str, geometry: Option<&PySlitGeometry>, window: Option<f64>) -> PyResult<f64> {
    let g = geometry.map_or(Ok(screen::SlitGeometry::default()), |g| g.checked())?;
    let condition: Condition = parse(condition)?;
    let p = screen::conditioned_pattern(&g, condition).map_err(value_err)?;
    screen::visibility(&p, window.unwrap_or_else(|| g.envelope_zero())).map_err(value_err)
}

/// Table a model declares for a named experiment.
#[pyfunction]
fn declared_distribution(model: &str, experiment: &str) -> PyResult<Table> {
    let config = harness::catalog(parse(experiment)?);
    let p = models::declared_distribution(parse::<ModelKind>(model)?, &config).map_err(value_err)?;
    Ok(table(p.cells))
}

/// Simulate a named experiment. Returns a dict with the ground-truth counts
/// (`raw`), the counts from matched coincidences (`coincident`) and click
/// totals.
#[pyfunction]
#[pyo3(signature = (experiment, model="qm", pairs=10_000, seed=0, detector="ideal"))]
fn run_experiment(
    py: Python<'_>,
    experiment: &str,
    model: &str,
    pairs: u64,
    seed: u64,
    detector: &str,
) -> PyResult<Py<PyAny>> {
    let experiment: Experiment = parse(experiment)?;
    let model: ModelKind = parse(model)?;
    let det = parse::<DetectorPreset>(detector)?.model();
    let config = harness::catalog(experiment).with_pairs(pairs).with_seed(seed);
    let out = py
        .detach(|| harness::run_experiment(&config, model, &det))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let matched = match_coincidences_with_delay(&out.clicks, det.coincidence_window, det.lower_delay);
    let coincident = build_table(&matched.coincidences, config.lower_basis);
    let counts = |t: &analysis::JointTable| table(t.counts.iter().map(|(&k, &n)| (k, n as f64)));

    let d = pyo3::types::PyDict::new(py);
    d.set_item("raw", counts(&analysis::JointTable::from_raw(&out.raw)))?;
    d.set_item("coincident", counts(&coincident))?;
    d.set_item("clicks", out.clicks.len())?;
    d.set_item("coincidences", matched.coincidences.len())?;
    d.set_item("accidentals", matched.accidentals())?;
    d.set_item(
        "sequence",
        analysis::coincidence_outcomes(&matched.coincidences, config.lower_basis)
            .into_iter()
            .map(|(u, l)| (u.to_string(), l.to_string()))
            .collect::<Vec<_>>(),
    )?;
    Ok(d.into_any().unbind())
}

/// Screen positions and partner outcomes of a screen run, as a list of
/// `(x, lower)`.
#[pyfunction]
#[pyo3(signature = (model="qm", pairs=10_000, seed=0, geometry=None))]
fn run_screen_experiment(
    py: Python<'_>,
    model: &str,
    pairs: u64,
    seed: u64,
    geometry: Option<&PySlitGeometry>,
) -> PyResult<Vec<(f64, String)>> {
    let g = geometry.map_or(Ok(screen::SlitGeometry::default()), |g| g.checked())?;
    let model: ModelKind = parse(model)?;
    let config = harness::catalog(Experiment::E6).with_pairs(pairs).with_seed(seed);
    let det = harness::DetectorModel::ideal();
    let run = py
        .detach(|| harness::run_screen_experiment(&config, model, &g, &det))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(run.hits.into_iter().map(|h| (h.x, h.lower.to_string())).collect())
}

/// Fringe visibility fitted to sampled screen positions.
#[pyfunction]
#[pyo3(signature = (positions, geometry=None))]
fn fitted_visibility(positions: Vec<f64>, geometry: Option<&PySlitGeometry>) -> PyResult<f64> {
    let g = geometry.map_or(Ok(screen::SlitGeometry::default()), |g| g.checked())?;
    screen::fitted_visibility(&positions, &g, g.envelope_zero()).map_err(value_err)
}

/// Sequence test on `(upper, lower)` outcome labels in pair order.
#[pyfunction]
#[pyo3(signature = (outcomes, alpha=1e-6))]
fn sequence_test(py: Python<'_>, outcomes: Vec<(String, String)>, alpha: f64) -> PyResult<Py<PyAny>> {
    let parsed = outcomes
        .iter()
        .map(|(u, l)| Ok((parse::<SideOutcome>(u)?, parse::<SideOutcome>(l)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let r = analysis::sequence_test(&parsed, alpha);
    let d = pyo3::types::PyDict::new(py);
    d.set_item("test_name", r.test_name)?;
    d.set_item("statistic", r.statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("log_likelihood_ratio", r.log_likelihood_ratio)?;
    d.set_item("n_pairs", r.n_pairs)?;
    d.set_item("verdict", format!("{:?}", r.verdict))?;
    Ok(d.into_any().unbind())
}

/// Smallest number of consecutive (E3, E3) pairs with `0.5^n ≤ alpha`.
#[pyfunction]
fn pairs_to_significance(alpha: f64) -> PyResult<u32> {
    analysis::pairs_to_significance(alpha).map_err(value_err)
}

/// Grid the screen patterns are evaluated on, as bin centres.
#[pyfunction]
#[pyo3(signature = (geometry=None))]
fn screen_grid(geometry: Option<&PySlitGeometry>) -> PyResult<Vec<f64>> {
    let g = geometry.map_or(Ok(screen::SlitGeometry::default()), |g| g.checked())?;
    Ok(ScreenGrid::default_for(&g).centers())
}

#[pymodule]
fn eraser_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyJointState>()?;
    m.add_class::<PySlitGeometry>()?;
    m.add_function(wrap_pyfunction!(joint_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(bomb_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(conditioned_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(declared_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_screen_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fitted_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_test, m)?)?;
    m.add_function(wrap_pyfunction!(pairs_to_significance, m)?)?;
    m.add_function(wrap_pyfunction!(screen_grid, m)?)?;
    Ok(())
}

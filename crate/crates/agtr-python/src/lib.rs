//! Python bindings for the AGTR evaluation toolkit.
//!
//! Exposes the clustering model, metrics, refinement utilities, AGTR
//! bounds, the shuffle correlation test, and PE metadata hashing as an
//! extension module named `agtr`.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use agtr_core::bounds;
use agtr_core::clustering;
use agtr_core::io;
use agtr_core::metrics;
use agtr_core::pehash;
use agtr_core::refinement;
use agtr_core::shuffle;

fn to_py_err(err: agtr_core::Error) -> PyErr {
    match err {
        agtr_core::Error::Io(io_err) => PyIOError::new_err(io_err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// An exact partition of a sample universe into named clusters.
#[pyclass(module = "agtr", from_py_object)]
#[derive(Clone)]
struct Clustering {
    inner: clustering::Clustering,
}

#[pymethods]
impl Clustering {
    /// Build from (sample_id, cluster_id) pairs.
    #[staticmethod]
    fn from_pairs(pairs: Vec<(String, String)>) -> PyResult<Self> {
        Ok(Clustering {
            inner: clustering::Clustering::from_assignments(pairs).map_err(to_py_err)?,
        })
    }

    /// Build from a {sample_id: label-or-None} mapping; unlabeled samples
    /// become singleton clusters.
    #[staticmethod]
    fn from_labels(labels: HashMap<String, Option<String>>) -> PyResult<Self> {
        let labeling = clustering::Labeling::new(
            labels
                .into_iter()
                .map(|(id, label)| Ok((clustering::SampleId::new(id)?, label)))
                .collect::<agtr_core::Result<Vec<_>>>()
                .map_err(to_py_err)?,
        )
        .map_err(to_py_err)?;
        Ok(Clustering {
            inner: clustering::Clustering::from_labels(&labeling).map_err(to_py_err)?,
        })
    }

    /// Load from a `sample_id,cluster_id` CSV file.
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        Ok(Clustering {
            inner: io::load_clustering(path).map_err(to_py_err)?,
        })
    }

    /// Write as a `sample_id,cluster_id` CSV file in canonical order.
    fn to_csv(&self, path: &str) -> PyResult<()> {
        io::save_clustering(&self.inner, path).map_err(to_py_err)
    }

    /// Number of samples.
    #[getter]
    fn m(&self) -> usize {
        self.inner.universe_size()
    }

    /// Number of clusters.
    #[getter]
    fn cluster_count(&self) -> usize {
        self.inner.cluster_count()
    }

    /// {cluster_id: [sample ids]} in canonical order.
    fn clusters(&self) -> HashMap<String, Vec<String>> {
        self.inner
            .iter()
            .map(|(name, members)| {
                (
                    name.to_string(),
                    members.iter().map(|id| id.to_string()).collect(),
                )
            })
            .collect()
    }

    /// Cluster containing the given sample, or None.
    fn cluster_of(&self, sample_id: &str) -> PyResult<Option<String>> {
        let id = clustering::SampleId::new(sample_id).map_err(to_py_err)?;
        Ok(self.inner.cluster_of(&id).map(str::to_string))
    }

    /// True iff every cluster here is contained in a cluster of `other`.
    fn is_refinement_of(&self, other: &Clustering) -> PyResult<bool> {
        refinement::is_refinement(&self.inner, &other.inner).map_err(to_py_err)
    }

    /// True iff both clusterings induce the same partition (names ignored).
    fn same_partition(&self, other: &Clustering) -> bool {
        self.inner.same_partition(&other.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.universe_size()
    }

    fn __repr__(&self) -> String {
        format!(
            "Clustering(m={}, clusters={})",
            self.inner.universe_size(),
            self.inner.cluster_count()
        )
    }

    fn __eq__(&self, other: &Clustering) -> bool {
        self.inner == other.inner
    }
}

/// A metric as an exact integer ratio plus its float value.
#[pyclass(module = "agtr", skip_from_py_object)]
#[derive(Clone)]
struct MetricValue {
    #[pyo3(get)]
    num: u64,
    #[pyo3(get)]
    den: u64,
    #[pyo3(get)]
    value: f64,
}

impl From<metrics::MetricValue> for MetricValue {
    fn from(v: metrics::MetricValue) -> Self {
        MetricValue {
            num: v.num,
            den: v.den,
            value: v.value,
        }
    }
}

#[pymethods]
impl MetricValue {
    fn __repr__(&self) -> String {
        format!("MetricValue({}/{} = {})", self.num, self.den, self.value)
    }

    fn __float__(&self) -> f64 {
        self.value
    }
}

/// AGTR bound report for one predicted clustering.
#[pyclass(module = "agtr", skip_from_py_object)]
#[derive(Clone)]
struct BoundReport {
    inner: bounds::BoundReport,
}

#[pymethods]
impl BoundReport {
    #[getter]
    fn m(&self) -> u64 {
        self.inner.m
    }

    #[getter]
    fn epsilon_hat(&self) -> u64 {
        self.inner.epsilon_hat
    }

    #[getter]
    fn precision_agtr(&self) -> MetricValue {
        self.inner.precision_agtr.into()
    }

    #[getter]
    fn recall_agtr(&self) -> MetricValue {
        self.inner.recall_agtr.into()
    }

    #[getter]
    fn precision_lower_bound(&self) -> f64 {
        self.inner.precision_lower_bound
    }

    #[getter]
    fn recall_upper_bound(&self) -> f64 {
        self.inner.recall_upper_bound
    }

    #[getter]
    fn accuracy_upper_bound(&self) -> f64 {
        self.inner.accuracy_upper_bound
    }

    /// (precision_lower_clamped, recall_upper_clamped).
    #[getter]
    fn clamped(&self) -> (bool, bool) {
        (
            self.inner.clamped_flags.precision_lower_clamped,
            self.inner.clamped_flags.recall_upper_clamped,
        )
    }

    /// The report as a stable-field-order JSON string.
    fn to_json(&self) -> PyResult<String> {
        let bytes = io::write_bound_report(&self.inner, None).map_err(to_py_err)?;
        Ok(String::from_utf8(bytes).expect("reports are UTF-8"))
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundReport(m={}, epsilon_hat={}, precision_lb={}, recall_ub={})",
            self.inner.m,
            self.inner.epsilon_hat,
            self.inner.precision_lower_bound,
            self.inner.recall_upper_bound
        )
    }
}

/// Precision of `c` against `d`.
#[pyfunction]
fn precision(c: &Clustering, d: &Clustering) -> PyResult<MetricValue> {
    Ok(metrics::precision(&c.inner, &d.inner)
        .map_err(to_py_err)?
        .into())
}

/// Recall of `c` against `d`.
#[pyfunction]
fn recall(c: &Clustering, d: &Clustering) -> PyResult<MetricValue> {
    Ok(metrics::recall(&c.inner, &d.inner)
        .map_err(to_py_err)?
        .into())
}

/// Accuracy by direct label comparison. Returns (MetricValue, bool) where
/// the flag warns that the label vocabularies are disjoint.
#[pyfunction]
fn accuracy(
    predicted: HashMap<String, Option<String>>,
    reference: HashMap<String, Option<String>>,
) -> PyResult<(MetricValue, bool)> {
    let build = |labels: HashMap<String, Option<String>>| -> agtr_core::Result<clustering::Labeling> {
        clustering::Labeling::new(
            labels
                .into_iter()
                .map(|(id, label)| Ok((clustering::SampleId::new(id)?, label)))
                .collect::<agtr_core::Result<Vec<_>>>()?,
        )
    };
    let report = metrics::accuracy(
        &build(predicted).map_err(to_py_err)?,
        &build(reference).map_err(to_py_err)?,
    )
    .map_err(to_py_err)?;
    Ok((report.accuracy.into(), report.disjoint_vocabularies))
}

/// Maps each cluster of `src` to the cluster of `dst` with maximal
/// overlap (ties to the lexicographically smallest target).
#[pyfunction]
fn cluster_mapping(src: &Clustering, dst: &Clustering) -> PyResult<HashMap<String, String>> {
    let mapping = metrics::cluster_mapping(
        &src.inner,
        &dst.inner,
        metrics::MappingDirection::PredictedToReference,
    )
    .map_err(to_py_err)?;
    Ok(mapping
        .pairs
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect())
}

/// True iff `r` is a set partition refinement of `s`.
#[pyfunction]
fn is_refinement(r: &Clustering, s: &Clustering) -> PyResult<bool> {
    refinement::is_refinement(&r.inner, &s.inner).map_err(to_py_err)
}

/// Minimum number of membership changes turning `a` into `b`.
#[pyfunction]
fn partition_distance(a: &Clustering, b: &Clustering) -> PyResult<u64> {
    refinement::partition_distance(&a.inner, &b.inner).map_err(to_py_err)
}

/// Minimum corrections making `r_hat` a refinement of `d`:
/// (count, [(sample_id, from_cluster, to_cluster), ...]).
#[pyfunction]
fn min_corrections(
    r_hat: &Clustering,
    d: &Clustering,
) -> PyResult<(u64, Vec<(String, String, String)>)> {
    let witness =
        refinement::min_corrections_to_refinement(&r_hat.inner, &d.inner).map_err(to_py_err)?;
    let moves = witness
        .moves
        .iter()
        .map(|m| (m.id.to_string(), m.from.to_string(), m.to.to_string()))
        .collect();
    Ok((witness.count, moves))
}

/// Randomly splits each cluster of `d`; always a true refinement of `d`.
#[pyfunction]
fn random_refinement(d: &Clustering, split_probability: f64, seed: u64) -> PyResult<Clustering> {
    if !(0.0..=1.0).contains(&split_probability) {
        return Err(PyValueError::new_err("split_probability must lie in [0, 1]"));
    }
    Ok(Clustering {
        inner: refinement::random_refinement(&d.inner, split_probability, seed),
    })
}

/// Moves exactly `n_moves` distinct samples to different clusters.
#[pyfunction]
fn perturb(s: &Clustering, n_moves: usize, seed: u64) -> PyResult<Clustering> {
    if n_moves > s.inner.universe_size() {
        return Err(PyValueError::new_err(
            "n_moves cannot exceed the universe size",
        ));
    }
    Ok(Clustering {
        inner: refinement::perturb(&s.inner, n_moves, seed),
    })
}

/// ε̂ = ceil(rate · m); rate defaults to one percent.
#[pyfunction]
#[pyo3(signature = (m, rate = 0.01))]
fn default_epsilon_hat(m: u64, rate: f64) -> PyResult<u64> {
    if m == 0 {
        return Err(PyValueError::new_err("m must be at least 1"));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(PyValueError::new_err("rate must lie in (0, 1]"));
    }
    Ok(bounds::epsilon_hat_for_rate(m, rate))
}

/// AGTR bound report for `c` against `r_hat` with error allowance ε̂.
#[pyfunction]
fn agtr_bounds(c: &Clustering, r_hat: &Clustering, epsilon_hat: u64) -> PyResult<BoundReport> {
    Ok(BoundReport {
        inner: bounds::agtr_bounds(&c.inner, &r_hat.inner, epsilon_hat).map_err(to_py_err)?,
    })
}

/// Tests reported metrics against AGTR bounds. Returns a dict with one
/// {"status", "margin"} entry per metric plus "any_suspect".
#[pyfunction]
#[pyo3(signature = (bounds_report, precision = None, recall = None, accuracy = None, source_dataset = None))]
fn litmus_test<'py>(
    py: Python<'py>,
    bounds_report: &BoundReport,
    precision: Option<f64>,
    recall: Option<f64>,
    accuracy: Option<f64>,
    source_dataset: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let reported = bounds::ReportedMetrics {
        source_dataset,
        precision,
        recall,
        accuracy,
    };
    reported.validate().map_err(to_py_err)?;
    let verdict = bounds::litmus_test(&reported, &bounds_report.inner);
    let status = |s: bounds::LitmusStatus| match s {
        bounds::LitmusStatus::Consistent => "CONSISTENT",
        bounds::LitmusStatus::SuspectOverfit => "SUSPECT_OVERFIT",
        bounds::LitmusStatus::NotTested => "NOT_TESTED",
    };
    let out = PyDict::new(py);
    for (name, metric) in [
        ("precision", verdict.precision),
        ("recall", verdict.recall),
        ("accuracy", verdict.accuracy),
    ] {
        let entry = PyDict::new(py);
        entry.set_item("status", status(metric.status))?;
        entry.set_item("margin", metric.margin)?;
        out.set_item(name, entry)?;
    }
    out.set_item("any_suspect", verdict.any_suspect())?;
    Ok(out)
}

/// Bound reports for several named candidates against one AGTR.
#[pyfunction]
fn compare_bounds(
    candidates: Vec<(String, Clustering)>,
    r_hat: &Clustering,
    epsilon_hat: u64,
) -> PyResult<Vec<(String, BoundReport)>> {
    let unwrapped: Vec<(String, clustering::Clustering)> = candidates
        .into_iter()
        .map(|(name, c)| (name, c.inner))
        .collect();
    let reports =
        bounds::compare_bounds(&unwrapped, &r_hat.inner, epsilon_hat).map_err(to_py_err)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.name, BoundReport { inner: r.report }))
        .collect())
}

/// Incremental shuffle run; returns
/// [(fraction, precision_lower_bound, recall_upper_bound), ...].
#[pyfunction]
fn shuffle_run(
    c: &Clustering,
    r_hat: &Clustering,
    epsilon_hat: u64,
    interval: f64,
    seed: u64,
) -> PyResult<Vec<(f64, f64, f64)>> {
    if !(interval > 0.0 && interval <= 1.0) {
        return Err(PyValueError::new_err("interval must lie in (0, 1]"));
    }
    let records = shuffle::shuffle_run(&c.inner, &r_hat.inner, epsilon_hat, interval, seed)
        .map_err(to_py_err)?;
    Ok(records
        .iter()
        .map(|r| (r.shuffle_fraction, r.precision_lower_bound, r.recall_upper_bound))
        .collect())
}

/// Pearson correlation test over shuffle records
/// [(fraction, precision_lb, recall_ub), ...].
#[pyfunction]
#[pyo3(signature = (records, threshold = -0.9))]
fn correlation_test<'py>(
    py: Python<'py>,
    records: Vec<(f64, f64, f64)>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let records: Vec<shuffle::ShuffleRecord> = records
        .iter()
        .map(|&(fraction, precision_lb, recall_ub)| shuffle::ShuffleRecord {
            shuffle_fraction: fraction,
            precision_lower_bound: precision_lb,
            recall_upper_bound: recall_ub,
        })
        .collect();
    let report = shuffle::correlation_test(&records, threshold).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("r_precision", report.r_precision)?;
    out.set_item("r_recall", report.r_recall)?;
    out.set_item("p_precision", report.p_precision)?;
    out.set_item("p_recall", report.p_recall)?;
    out.set_item("n_points", report.n_points)?;
    out.set_item("threshold", report.threshold)?;
    out.set_item("pass", report.pass)?;
    Ok(out)
}

/// Metadata digest of a PE image. Raises ValueError naming the parse
/// failure for malformed input.
#[pyfunction]
fn pehash_digest(data: &[u8]) -> PyResult<String> {
    pehash::pehash_of_bytes(data)
        .map(|d| d.as_str().to_string())
        .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.status_name())))
}

/// Extracted digest features of a PE image, as a dict.
#[pyfunction]
fn parse_pe<'py>(py: Python<'py>, data: &[u8]) -> PyResult<Bound<'py, PyDict>> {
    let meta = pehash::parse_pe(data)
        .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.status_name())))?;
    let out = PyDict::new(py);
    out.set_item("characteristics", meta.characteristics)?;
    out.set_item("subsystem", meta.subsystem)?;
    out.set_item("stack_commit_log2", meta.stack_commit_log2)?;
    out.set_item("heap_commit_log2", meta.heap_commit_log2)?;
    let sections: Vec<(u8, u8, u8, u8)> = meta
        .sections
        .iter()
        .map(|s| {
            (
                s.vaddr_log2,
                s.raw_size_log2,
                s.characteristics_folded,
                s.entropy_bucket,
            )
        })
        .collect();
    out.set_item("sections", sections)?;
    Ok(out)
}

/// Groups (sample_id, digest-or-None) pairs into an AGTR clustering;
/// samples without a digest become singletons.
#[pyfunction]
fn build_agtr(digests: Vec<(String, Option<String>)>) -> PyResult<Clustering> {
    let rows = digests
        .into_iter()
        .map(|(id, digest)| {
            let digest = match digest {
                Some(hex) => Some(
                    pehash::PeDigest::from_hex(&hex)
                        .ok_or_else(|| PyValueError::new_err(format!("malformed digest `{hex}`")))?,
                ),
                None => None,
            };
            Ok((
                clustering::SampleId::new(&id).map_err(to_py_err)?,
                digest,
            ))
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(Clustering {
        inner: pehash::build_agtr(rows).map_err(to_py_err)?,
    })
}

/// A synthetic, structurally valid one-section PE32 image for testing.
#[pyfunction]
#[pyo3(signature = (subsystem = 2, timestamp = 0, payload = None))]
fn synthetic_pe<'py>(
    py: Python<'py>,
    subsystem: u16,
    timestamp: u32,
    payload: Option<Vec<u8>>,
) -> Bound<'py, PyBytes> {
    let image = pehash::fixture::PeFixture::pe32()
        .subsystem(subsystem)
        .timestamp(timestamp)
        .section(
            ".text",
            0x1000,
            0x6000_0020,
            payload.unwrap_or_else(|| b"synthetic payload".to_vec()),
        )
        .build();
    PyBytes::new(py, &image)
}

#[pymodule]
fn agtr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Clustering>()?;
    m.add_class::<MetricValue>()?;
    m.add_class::<BoundReport>()?;
    m.add_function(wrap_pyfunction!(precision, m)?)?;
    m.add_function(wrap_pyfunction!(recall, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_mapping, m)?)?;
    m.add_function(wrap_pyfunction!(is_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(partition_distance, m)?)?;
    m.add_function(wrap_pyfunction!(min_corrections, m)?)?;
    m.add_function(wrap_pyfunction!(random_refinement, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(default_epsilon_hat, m)?)?;
    m.add_function(wrap_pyfunction!(agtr_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(litmus_test, m)?)?;
    m.add_function(wrap_pyfunction!(compare_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(shuffle_run, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_test, m)?)?;
    m.add_function(wrap_pyfunction!(pehash_digest, m)?)?;
    m.add_function(wrap_pyfunction!(parse_pe, m)?)?;
    m.add_function(wrap_pyfunction!(build_agtr, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_pe, m)?)?;
    Ok(())
}

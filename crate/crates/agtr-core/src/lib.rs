//! Label-free evaluation of clustering algorithms and multi-class
//! classifiers via approximate ground truth refinements (AGTRs).
//!
//! An AGTR groups only samples that (up to a small number of errors ε)
//! share an unknown reference label. With an error allowance ε̂ ≥ ε, the
//! precision of a predicted clustering against the unknown reference is
//! provably at least `Precision(C, R̂) − ε̂/m`, and recall and accuracy are
//! at most `Recall(C, R̂) + ε̂/m` — no reference labels required.
//!
//! The crate provides:
//! - the partition/contingency data model ([`clustering`]),
//! - overlap-based precision/recall/accuracy ([`metrics`]),
//! - refinement checks, the ε and δ oracles, and seeded perturbation
//!   generators ([`refinement`]),
//! - AGTR bound reports and the over-fit litmus test ([`bounds`]),
//! - the incremental shuffle / correlation precondition test ([`shuffle`]),
//! - a PE metadata digest and digest-grouped AGTR construction for malware
//!   corpora ([`pehash`]),
//! - file formats and report serialization ([`io`]).

pub mod bounds;
pub mod clustering;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pehash;
pub mod refinement;
pub mod shuffle;

pub use bounds::{
    agtr_bounds, compare_bounds, default_epsilon_hat, epsilon_hat_for_rate, litmus_test,
    BoundReport, LitmusStatus, LitmusVerdict, NamedBoundReport, ReportedMetrics,
};
pub use clustering::{contingency, Clustering, ContingencyTable, Labeling, SampleId};
pub use error::{Error, Result};
pub use metrics::{accuracy, cluster_mapping, precision, recall, MetricValue};
pub use refinement::{
    decompose, is_refinement, min_corrections_to_refinement, partition_distance, perturb,
    random_refinement, CorrectionWitness,
};
pub use shuffle::{correlation_test, shuffle_run, CorrelationReport, ShuffleRecord};

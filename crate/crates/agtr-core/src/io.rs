//! File formats: clustering and label CSVs, digest CSVs, shuffle-record
//! CSVs, and the JSON bound-report document.
//!
//! Clustering files are UTF-8, RFC-4180-quoted CSV with the exact header
//! `sample_id,cluster_id`; label files use `sample_id,label` where an empty
//! label marks an unlabeled sample. Parsing streams rows, so memory is
//! spent only on the cluster structures themselves.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundReport, LitmusVerdict};
use crate::clustering::{Clustering, Labeling, SampleId};
use crate::error::{Error, Result};
use crate::pehash::PeDigest;
use crate::shuffle::ShuffleRecord;

/// Required header of clustering files.
pub const CLUSTERING_HEADER: &str = "sample_id,cluster_id";
/// Required header of label files.
pub const LABEL_HEADER: &str = "sample_id,label";
/// Required header of digest files.
pub const DIGEST_HEADER: &str = "sample_id,digest,status";
/// Header of shuffle-record files.
pub const RECORDS_HEADER: &str = "fraction,precision_lb,recall_ub";

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &'static str) -> Result<()> {
    let headers = reader.headers()?;
    let found = headers.iter().collect::<Vec<_>>().join(",");
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::EmptyFile);
    }
    if found != expected {
        return Err(Error::MalformedHeader { expected, found });
    }
    Ok(())
}

fn row_line(record: &csv::StringRecord) -> Option<u64> {
    record.position().map(|p| p.line())
}

/// Streams a clustering from `sample_id,cluster_id` CSV.
pub fn read_clustering(reader: impl Read) -> Result<Clustering> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    check_header(&mut csv_reader, CLUSTERING_HEADER)?;

    let mut by_cluster: BTreeMap<Arc<str>, Vec<SampleId>> = BTreeMap::new();
    let mut seen: std::collections::HashSet<SampleId> = std::collections::HashSet::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = row_line(&record);
        let id = record.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(Error::EmptyId { line });
        }
        let id = SampleId::new(id)?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSample {
                id: id.to_string(),
                line,
            });
        }
        let cluster = record.get(1).unwrap_or("");
        by_cluster
            .entry(Arc::from(cluster))
            .or_default()
            .push(id);
    }
    if by_cluster.is_empty() {
        return Err(Error::EmptyFile);
    }
    Clustering::from_assignments(by_cluster.into_iter().flat_map(|(name, ids)| {
        ids.into_iter()
            .map(move |id| (id.to_string(), name.to_string()))
    }))
}

/// Loads a clustering from a CSV file.
pub fn load_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    read_clustering(std::fs::File::open(path)?)
}

/// Writes a clustering as `sample_id,cluster_id` CSV in canonical order;
/// output bytes are deterministic for a given clustering.
pub fn write_clustering(clustering: &Clustering, writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["sample_id", "cluster_id"])?;
    for (name, members) in clustering.iter() {
        for id in members {
            csv_writer.write_record([id.as_str(), name])?;
        }
    }
    csv_writer.flush()?;
    Ok(())
}

/// Saves a clustering to a CSV file.
pub fn save_clustering(clustering: &Clustering, path: impl AsRef<Path>) -> Result<()> {
    write_clustering(clustering, std::fs::File::create(path)?)
}

/// Streams a labeling from `sample_id,label` CSV; empty labels mean
/// unlabeled.
pub fn read_labels(reader: impl Read) -> Result<Labeling> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    check_header(&mut csv_reader, LABEL_HEADER)?;
    let mut entries: Vec<(SampleId, Option<String>)> = Vec::new();
    let mut seen: std::collections::HashSet<SampleId> = std::collections::HashSet::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = row_line(&record);
        let id = record.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(Error::EmptyId { line });
        }
        let id = SampleId::new(id)?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSample {
                id: id.to_string(),
                line,
            });
        }
        let label = match record.get(1).unwrap_or("") {
            "" => None,
            l => Some(l.to_string()),
        };
        entries.push((id, label));
    }
    if entries.is_empty() {
        return Err(Error::EmptyFile);
    }
    Labeling::new(entries)
}

/// Loads a labeling from a CSV file.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Labeling> {
    read_labels(std::fs::File::open(path)?)
}

/// One row of a digest CSV: a sample, its digest when parsing succeeded,
/// and a status naming the parse error otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestRow {
    /// The scanned sample.
    pub sample_id: SampleId,
    /// Digest, present iff `status == "ok"`.
    pub digest: Option<PeDigest>,
    /// `ok` or a parse-error variant name.
    pub status: String,
}

/// Writes digest rows as `sample_id,digest,status` CSV.
pub fn write_digests(rows: &[DigestRow], writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["sample_id", "digest", "status"])?;
    for row in rows {
        let digest = row.digest.as_ref().map(|d| d.as_str()).unwrap_or("");
        csv_writer.write_record([row.sample_id.as_str(), digest, &row.status])?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Reads digest rows from `sample_id,digest,status` CSV. Rows whose status
/// is not `ok` (or whose digest is malformed) carry no digest.
pub fn read_digests(reader: impl Read) -> Result<Vec<DigestRow>> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    check_header(&mut csv_reader, DIGEST_HEADER)?;
    let mut rows = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = row_line(&record);
        let id = record.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(Error::EmptyId { line });
        }
        let status = record.get(2).unwrap_or("").to_string();
        let digest = if status == "ok" {
            PeDigest::from_hex(record.get(1).unwrap_or(""))
        } else {
            None
        };
        rows.push(DigestRow {
            sample_id: SampleId::new(id)?,
            digest,
            status,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(rows)
}

/// Writes shuffle records as `fraction,precision_lb,recall_ub` CSV.
pub fn write_records(records: &[ShuffleRecord], writer: impl Write) -> Result<()> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["fraction", "precision_lb", "recall_ub"])?;
    for record in records {
        csv_writer.write_record([
            format_f64(record.shuffle_fraction),
            format_f64(record.precision_lower_bound),
            format_f64(record.recall_upper_bound),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

fn format_f64(v: f64) -> String {
    let mut s = serde_json::Number::from_f64(v)
        .map(|n| n.to_string())
        .unwrap_or_else(|| v.to_string());
    if !s.contains('.') && !s.contains('e') && !s.contains('E') {
        s.push_str(".0");
    }
    s
}

/// The serialized bound-report document: the report fields in stable order
/// followed by the litmus verdicts when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReportDocument {
    /// The bound report itself.
    #[serde(flatten)]
    pub report: BoundReport,
    /// Litmus verdicts, when a litmus test was run.
    pub verdicts: Option<LitmusVerdict>,
}

/// Serializes a bound report (plus optional litmus verdicts) as pretty
/// JSON with stable field order; identical inputs produce identical bytes.
pub fn write_bound_report(report: &BoundReport, verdicts: Option<&LitmusVerdict>) -> Result<Vec<u8>> {
    let document = BoundReportDocument {
        report: report.clone(),
        verdicts: verdicts.copied(),
    };
    let mut bytes = serde_json::to_vec_pretty(&document)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses a bound-report document produced by [`write_bound_report`].
pub fn read_bound_report(bytes: &[u8]) -> Result<BoundReportDocument> {
    Ok(serde_json::from_slice(bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{agtr_bounds, litmus_test, ReportedMetrics};

    fn clustering(spec: &[(&str, &[&str])]) -> Clustering {
        let pairs: Vec<(String, String)> = spec
            .iter()
            .flat_map(|(name, ids)| {
                ids.iter()
                    .map(|id| (id.to_string(), name.to_string()))
                    .collect::<Vec<_>>()
            })
            .collect();
        Clustering::from_assignments(pairs).unwrap()
    }

    #[test]
    fn clustering_round_trip() {
        let c = clustering(&[("alpha", &["1", "2"]), ("beta", &["3"])]);
        let mut buffer = Vec::new();
        write_clustering(&c, &mut buffer).unwrap();
        let parsed = read_clustering(buffer.as_slice()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn clustering_write_is_deterministic() {
        let c = clustering(&[("b", &["3", "1"]), ("a", &["2"])]);
        let mut first = Vec::new();
        let mut second = Vec::new();
        write_clustering(&c, &mut first).unwrap();
        write_clustering(&c, &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn quoted_fields_round_trip() {
        let c = clustering(&[("has,comma", &["id with \"quotes\"", "plain"])]);
        let mut buffer = Vec::new();
        write_clustering(&c, &mut buffer).unwrap();
        let parsed = read_clustering(buffer.as_slice()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn wrong_header_rejected() {
        let err = read_clustering("id,cluster\n1,a\n".as_bytes()).unwrap_err();
        match err {
            Error::MalformedHeader { expected, found } => {
                assert_eq!(expected, CLUSTERING_HEADER);
                assert_eq!(found, "id,cluster");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(
            read_clustering("".as_bytes()).unwrap_err(),
            Error::EmptyFile
        ));
        assert!(matches!(
            read_clustering("sample_id,cluster_id\n".as_bytes()).unwrap_err(),
            Error::EmptyFile
        ));
    }

    #[test]
    fn duplicate_reports_line_number() {
        let err = read_clustering("sample_id,cluster_id\n1,a\n2,b\n1,c\n".as_bytes()).unwrap_err();
        match err {
            Error::DuplicateSample { id, line } => {
                assert_eq!(id, "1");
                assert_eq!(line, Some(4));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn labels_round_trip_with_empty_label() {
        let labeling = read_labels("sample_id,label\n1,zeus\n2,zeus\n3,\n".as_bytes()).unwrap();
        assert_eq!(labeling.len(), 3);
        assert_eq!(labeling.label_of(&SampleId::new("1").unwrap()), Some("zeus"));
        assert_eq!(labeling.label_of(&SampleId::new("3").unwrap()), None);
        let c = Clustering::from_labels(&labeling).unwrap();
        assert_eq!(c.cluster_count(), 2);
    }

    #[test]
    fn digest_rows_round_trip() {
        let rows = vec![
            DigestRow {
                sample_id: SampleId::new("good.exe").unwrap(),
                digest: PeDigest::from_hex("a".repeat(64)),
                status: "ok".to_string(),
            },
            DigestRow {
                sample_id: SampleId::new("bad.bin").unwrap(),
                digest: None,
                status: "MissingMzMagic".to_string(),
            },
        ];
        let mut buffer = Vec::new();
        write_digests(&rows, &mut buffer).unwrap();
        let parsed = read_digests(buffer.as_slice()).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn bound_report_document_round_trip() {
        let c = clustering(&[("c1", &["1", "2", "3", "4"]), ("c2", &["5", "6", "7", "8"])]);
        let r_hat = clustering(&[
            ("r1", &["1", "2"]),
            ("r2", &["3", "4"]),
            ("r3", &["5", "6"]),
            ("r4", &["7", "8"]),
        ]);
        let report = agtr_bounds(&c, &r_hat, 1).unwrap();
        let reported = ReportedMetrics {
            source_dataset: Some("bench".to_string()),
            precision: Some(0.9),
            recall: Some(0.8),
            accuracy: None,
        };
        let verdicts = litmus_test(&reported, &report);
        let bytes = write_bound_report(&report, Some(&verdicts)).unwrap();
        let parsed = read_bound_report(&bytes).unwrap();
        assert_eq!(parsed.report, report);
        assert_eq!(parsed.verdicts, Some(verdicts));
        // serialization is byte-stable
        assert_eq!(bytes, write_bound_report(&report, Some(&verdicts)).unwrap());
    }

    #[test]
    fn bound_report_serializes_exact_decimals() {
        let mut report = agtr_bounds(
            &clustering(&[("a", &["1", "2"])]),
            &clustering(&[("b", &["1", "2"])]),
            0,
        )
        .unwrap();
        report.precision_lower_bound = 0.229;
        report.recall_upper_bound = 0.895;
        report.accuracy_upper_bound = 0.895;
        let text = String::from_utf8(write_bound_report(&report, None).unwrap()).unwrap();
        assert!(text.contains("\"precision_lower_bound\": 0.229"));
        assert!(text.contains("\"recall_upper_bound\": 0.895"));
    }

    #[test]
    fn records_csv_shape() {
        let records = vec![
            ShuffleRecord {
                shuffle_fraction: 0.0,
                precision_lower_bound: 0.75,
                recall_upper_bound: 1.0,
            },
            ShuffleRecord {
                shuffle_fraction: 0.5,
                precision_lower_bound: 0.5,
                recall_upper_bound: 0.9,
            },
        ];
        let mut buffer = Vec::new();
        write_records(&records, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RECORDS_HEADER));
        assert_eq!(lines.next(), Some("0.0,0.75,1.0"));
        assert_eq!(lines.next(), Some("0.5,0.5,0.9"));
    }
}

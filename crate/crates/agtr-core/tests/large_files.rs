//! Streaming-parse behavior at corpus scale: a million-row clustering CSV
//! loads without superlinear blowup.

use std::io::Write;
use std::time::Instant;

use agtr_core::io;

#[test]
fn million_row_clustering_csv_parses() {
    const ROWS: usize = 1_000_000;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("million.csv");
    {
        let mut file = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
        writeln!(file, "sample_id,cluster_id").unwrap();
        for i in 0..ROWS {
            writeln!(file, "s{i:07},c{:05}", i / 50).unwrap();
        }
    }
    let started = Instant::now();
    let clustering = io::load_clustering(&path).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(clustering.universe_size(), ROWS);
    assert_eq!(clustering.cluster_count(), ROWS / 50);
    // linear-time streaming parse; generous wall-clock ceiling
    assert!(
        elapsed.as_secs_f64() < 20.0,
        "parsing 10^6 rows took {elapsed:?}"
    );
    println!("parsed {ROWS} rows in {elapsed:?}");
}

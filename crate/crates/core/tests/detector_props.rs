mod common;

use std::collections::BTreeSet;

use image::{Rgb, RgbImage};
use ltcsum_core::detector::{
    detect, load_scorefile, read_scorefile, score_batch, DetectionRecord, DetectionTable, ExecBackend, ScoreBackend,
    ScoreRow, ScorefileBackend,
};
use ltcsum_core::{BackendError, Error};
use proptest::prelude::*;

fn labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("e{i}")).collect()
}

/// Rows built from positive weights, normalised to sum to one.
fn table() -> impl Strategy<Value = DetectionTable> {
    (2usize..7).prop_flat_map(|k| {
        prop::collection::vec(prop::collection::vec(1u32..1000, k), 1..40).prop_map(move |rows| {
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, w)| {
                    let z: u32 = w.iter().sum();
                    ScoreRow {
                        thumb_index: i as u64,
                        probs: w.iter().map(|&x| x as f64 / z as f64).collect(),
                    }
                })
                .collect();
            DetectionTable::new(labels(k), rows).unwrap()
        })
    })
}

fn subset(table: &DetectionTable, mask: u32) -> Vec<String> {
    table
        .class_labels()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, l)| l.clone())
        .collect()
}

fn hit_set(records: &[DetectionRecord]) -> BTreeSet<u64> {
    records.iter().map(|r| r.thumb_index).collect()
}

proptest! {
    #[test]
    fn detect_matches_oracle(t in table(), mask in 1u32..64, th in 0.01f64..1.0) {
        let pref = subset(&t, mask);
        prop_assume!(!pref.is_empty());
        prop_assert_eq!(detect(&t, &pref, th).unwrap(), common::detect_oracle(&t, &pref, th));
    }

    #[test]
    fn higher_threshold_never_adds(t in table(), mask in 1u32..64, a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let pref = subset(&t, mask);
        prop_assume!(!pref.is_empty());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let strict = hit_set(&detect(&t, &pref, hi).unwrap());
        let loose = hit_set(&detect(&t, &pref, lo).unwrap());
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn more_events_never_remove(t in table(), m1 in 1u32..64, m2 in 0u32..64, th in 0.01f64..1.0) {
        let small = subset(&t, m1);
        prop_assume!(!small.is_empty());
        let large = subset(&t, m1 | m2);
        let a = hit_set(&detect(&t, &small, th).unwrap());
        let b = hit_set(&detect(&t, &large, th).unwrap());
        prop_assert!(a.is_subset(&b));
    }

    #[test]
    fn unnormalised_rows_are_rejected(t in table(), row in 0usize..40, bump in 0.001f64..0.5) {
        let mut rows = t.rows().to_vec();
        let r = row % rows.len();
        let k = rows[r].probs.len();
        // push the sum off one while staying inside [0, 1] per entry
        let c = (0..k).min_by(|&a, &b| rows[r].probs[a].total_cmp(&rows[r].probs[b])).unwrap();
        rows[r].probs[c] += bump;
        prop_assert!(DetectionTable::new(t.class_labels().to_vec(), rows).is_err());
    }

    #[test]
    fn records_are_sorted_and_above_threshold(t in table(), th in 0.01f64..1.0) {
        let pref = t.class_labels().to_vec();
        let recs = detect(&t, &pref, th).unwrap();
        prop_assert!(recs.windows(2).all(|w| w[0].thumb_index < w[1].thumb_index));
        prop_assert!(recs.iter().all(|r| r.score >= th && pref.contains(&r.best_event)));
    }

    #[test]
    fn scorefile_round_trip(t in table()) {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_scorefile(buf.as_slice(), t.class_labels()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn threshold_is_inclusive() {
    let t = DetectionTable::new(
        labels(2),
        vec![ScoreRow {
            thumb_index: 0,
            probs: vec![0.5, 0.5],
        }],
    )
    .unwrap();
    let recs = detect(&t, &labels(2), 0.5).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].best_event, "e0");
}

#[test]
fn scorefile_columns_reorder_and_errors_carry_lines() {
    let want = labels(2);
    let t = read_scorefile("thumb_index,e1,e0\n0,0.25,0.75\n".as_bytes(), &want).unwrap();
    assert_eq!(t.rows()[0].probs, vec![0.75, 0.25]);
    let err = read_scorefile("thumb_index,e0,e1\n0,0.5,0.5\n1,0.9,0.9\n".as_bytes(), &want).unwrap_err();
    assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
    let err = read_scorefile("thumb_index,e0,zz\n".as_bytes(), &want).unwrap_err();
    assert!(matches!(err, Error::Format { line: 1, .. }));
}

#[test]
fn scorefile_backend_replays_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "thumb_index,e0,e1\n0,0.1,0.9\n1,1,0\n2,0.5,0.5\n").unwrap();
    let backend = ScorefileBackend::new(load_scorefile(&path, &labels(2)).unwrap());
    let imgs = vec![RgbImage::new(4, 4); 2];
    let t = score_batch(&backend, 1, &imgs).unwrap();
    assert_eq!(t.rows()[0].probs, vec![1.0, 0.0]);
    assert!(matches!(backend.score_batch(2, &imgs), Err(Error::Validation(_))));
}

fn echo(args: &[&str], labels: Vec<String>) -> ExecBackend {
    ExecBackend::new(
        env!("CARGO_BIN_EXE_ltcsum-echo-backend"),
        args.iter().map(|s| s.to_string()).collect(),
        labels,
    )
}

fn images(n: usize) -> Vec<RgbImage> {
    (0..n).map(|i| RgbImage::from_pixel(16, 9, Rgb([i as u8, 0, 0]))).collect()
}

#[test]
fn exec_backend_uniform_rows() {
    let b = echo(&["--labels", "a,b,c,d"], vec!["a".into(), "b".into(), "c".into(), "d".into()]);
    let t = score_batch(&b, 10, &images(7)).unwrap();
    assert_eq!(t.len(), 7);
    assert_eq!(t.rows()[0].thumb_index, 10);
    assert!(t.rows().iter().all(|r| r.probs == vec![0.25; 4]));
}

#[test]
fn exec_backend_matches_out_of_order_answers() {
    let mut b = echo(&["--labels", "a,b", "--reverse", "5"], vec!["b".into(), "a".into()]);
    b.pool = 3;
    let t = score_batch(&b, 0, &images(23)).unwrap();
    let idx: Vec<u64> = t.rows().iter().map(|r| r.thumb_index).collect();
    assert_eq!(idx, (0..23).collect::<Vec<_>>());
}

#[test]
fn exec_backend_crash_is_reported() {
    let b = echo(&["--labels", "a,b", "--crash-after", "3"], vec!["a".into(), "b".into()]);
    let err = b.score_batch(0, &images(6)).unwrap_err();
    assert!(matches!(err, Error::Backend(BackendError::Crashed(_))), "{err}");
    assert!(err.to_string().contains("simulated crash"), "{err}");
}

#[test]
fn exec_backend_not_configured() {
    let b = ExecBackend::new("/nonexistent/scorer", vec![], vec!["a".into()]);
    assert!(matches!(
        b.score_batch(0, &images(1)),
        Err(Error::Backend(BackendError::NotConfigured(_)))
    ));
    let b = echo(&["--labels", "a"], vec![]);
    assert!(matches!(
        b.score_batch(0, &images(1)),
        Err(Error::Backend(BackendError::NotConfigured(_)))
    ));
}

#[test]
fn exec_backend_missing_label_is_a_crash() {
    let b = echo(&["--labels", "a,b"], vec!["a".into(), "zzz".into()]);
    assert!(matches!(
        b.score_batch(0, &images(2)),
        Err(Error::Backend(BackendError::Crashed(_)))
    ));
}

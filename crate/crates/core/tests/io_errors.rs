use std::fs;

use photocorr::io::{parse_histogram_csv, read_stream, TimestampFileHeader};
use photocorr::Error;

fn binary(count: u64, payload: &[u64], duration: u64) -> Vec<u8> {
    let mut b = TimestampFileHeader {
        resolution_ps: 1,
        count,
        duration_ps: duration,
    }
    .to_bytes()
    .to_vec();
    for t in payload {
        b.extend_from_slice(&t.to_le_bytes());
    }
    b
}

fn read_bytes(bytes: &[u8]) -> photocorr::Result<photocorr::TimestampStream> {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.phst");
    fs::write(&p, bytes).unwrap();
    read_stream(&p)
}

#[test]
fn bad_magic() {
    let mut b = binary(1, &[5], 10);
    b[0] = b'X';
    assert!(matches!(read_bytes(&b), Err(Error::BadMagic { .. })));
}

#[test]
fn short_header() {
    let b = binary(1, &[5], 10);
    assert!(matches!(
        read_bytes(&b[..20]),
        Err(Error::TruncatedHeader {
            expected: 32,
            found: 20
        })
    ));
}

#[test]
fn truncated_payload() {
    let b = binary(3, &[5, 6], 10);
    assert!(matches!(
        read_bytes(&b),
        Err(Error::Truncated { expected: 3, found: 2 })
    ));
}

#[test]
fn trailing_bytes() {
    let mut b = binary(1, &[5], 10);
    b.extend_from_slice(&[0, 0, 0]);
    assert!(matches!(
        read_bytes(&b),
        Err(Error::TrailingBytes { count: 1, extra: 3 })
    ));
}

#[test]
fn decreasing_pair_names_the_index() {
    let b = binary(4, &[1, 9, 7, 12], 20);
    let e = read_bytes(&b).unwrap_err();
    assert!(matches!(
        e,
        Error::NonMonotonic {
            index: 2,
            previous: 9,
            value: 7
        }
    ));
    assert!(e.to_string().contains("index 2"));
}

#[test]
fn repeated_detection_is_rejected() {
    assert!(matches!(
        read_bytes(&binary(2, &[4, 4], 10)),
        Err(Error::NonMonotonic { index: 1, .. })
    ));
}

#[test]
fn timestamp_past_duration() {
    assert!(matches!(
        read_bytes(&binary(1, &[50], 10)),
        Err(Error::OutOfRange { .. })
    ));
}

#[test]
fn text_stream_reports_the_line() {
    assert_eq!(read_bytes(b"0\n50000\n80000\n").unwrap().times(), &[0, 50_000, 80_000]);
    assert!(matches!(
        read_bytes(b"0\n50000\n40000\n"),
        Err(Error::NonMonotonic { index: 2, .. })
    ));
    // an ASCII letter is neither text timestamps nor the binary magic
    assert!(matches!(read_bytes(b"0\n5a\n"), Err(Error::BadMagic { .. })));
}

#[test]
fn malformed_csv() {
    assert!(matches!(
        parse_histogram_csv("a,b,c\n"),
        Err(Error::Parse { line: 1, .. })
    ));
    let e = parse_histogram_csv("bin_center_ns,counts,g2\n0.5000,3,\n1.5000,x,\n").unwrap_err();
    assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
    let e = parse_histogram_csv("bin_center_ns,counts,g2\n0.5000,3\n").unwrap_err();
    assert!(matches!(e, Error::Parse { line: 2, .. }));
    let t = parse_histogram_csv("bin_center_ns,counts,g2\n0.5000,3,\n1.5000,4,\n3.5000,1,\n").unwrap();
    assert!(t.to_histogram(photocorr::correlator::Estimator::AllPairs).is_err());
}

#[test]
fn header_only_csv_has_no_rows() {
    let t = parse_histogram_csv("bin_center_ns,counts,g2\n").unwrap();
    assert!(t.rows.is_empty());
}

#![no_main]

use gps_core::io::{parse_table, read_classification, read_points, read_regression};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = parse_table(data) {
        assert_eq!(t.values.cols(), t.header.len());
    }
    let _ = read_regression(data);
    let _ = read_classification(data);
    let _ = read_points(data);
});

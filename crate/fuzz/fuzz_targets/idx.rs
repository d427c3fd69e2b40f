#![no_main]

use gps_core::io::parse_idx;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(idx) = parse_idx(data) {
        assert_eq!(idx.payload.len(), idx.dims.iter().product::<usize>());
    }
});

#![no_main]

use gps_core::io::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

// Input layout: manifest length as u16 LE, manifest bytes, payload bytes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = usize::from(u16::from_le_bytes([data[0], data[1]])).min(data.len() - 2);
    let Ok(manifest) = std::str::from_utf8(&data[2..2 + n]) else { return };
    if let Ok(ckpt) = decode_checkpoint(manifest, &data[2 + n..]) {
        let (m, p) = encode_checkpoint(&ckpt).unwrap();
        let again = decode_checkpoint(&m, &p).unwrap();
        assert_eq!(again.params, ckpt.params);
    }
});

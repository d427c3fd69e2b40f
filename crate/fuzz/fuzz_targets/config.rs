#![no_main]

use gps_core::io::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&echoed).unwrap(), cfg);
        let _ = cfg.resolve(3);
    }
});

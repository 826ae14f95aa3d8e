#![no_main]

use hjd_core::ablation::parse_distribution_lines;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(map) = parse_distribution_lines(data) {
        for d in map.values() {
            assert!((d.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
});

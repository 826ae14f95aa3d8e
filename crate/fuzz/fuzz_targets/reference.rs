#![no_main]

use hjd_core::dataset::{parse_jsonl, ReferenceDistributionRecord};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_jsonl::<ReferenceDistributionRecord>(data) {
        for r in records {
            assert!(r.annotator_count >= 1);
            assert!(r.distribution.as_array().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
});

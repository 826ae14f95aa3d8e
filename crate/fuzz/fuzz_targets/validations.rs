#![no_main]

use hjd_core::dataset::parse_jsonl;
use hjd_core::selection::ValidationRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_jsonl::<ValidationRecord>(data) {
        for r in records {
            assert!(!r.supports_reasonable_label || r.annotator_label.is_some());
        }
    }
});

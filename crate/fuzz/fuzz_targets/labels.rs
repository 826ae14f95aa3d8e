#![no_main]

use hjd_core::dataset::{group_label_records, parse_jsonl, LabelRecord};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_jsonl::<LabelRecord>(data) {
        for r in &records {
            let d = r.distribution().as_array();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let _ = r.majority();
        }
        let _ = group_label_records(records);
    }
});

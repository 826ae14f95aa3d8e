#![no_main]

use hjd_core::dataset::parse_jsonl;
use hjd_core::explanation::{ExplanationPool, ExplanationRecord};
use hjd_core::selection::human_sets;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_jsonl::<ExplanationRecord>(data) {
        let sets = human_sets(&records);
        assert!(sets.iter().map(|s| s.len()).sum::<usize>() <= records.len());
        let pool = ExplanationPool::from_records(records);
        let _ = pool.len();
    }
});

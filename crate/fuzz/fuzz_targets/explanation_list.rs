#![no_main]

use hjd_core::generation::parse_explanation_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(items) = parse_explanation_list(data) {
        assert!(items.iter().all(|i| !i.trim().is_empty()));
    }
});

#![no_main]

use hjd_core::dataset::{parse_jsonl, LabeledInstance};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_jsonl::<LabeledInstance>(data);
});

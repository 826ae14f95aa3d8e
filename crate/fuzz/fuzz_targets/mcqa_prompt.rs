#![no_main]

use hjd_core::prompt::parse_mcqa_prompt;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Some(p) = parse_mcqa_prompt(data) {
        let labels = p.mapping.labels();
        assert!(labels[0] != labels[1] && labels[1] != labels[2] && labels[0] != labels[2]);
    }
});

#![no_main]

use hjd_core::prompt::parse_generation_prompt;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_generation_prompt(data);
});

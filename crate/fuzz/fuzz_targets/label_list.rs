#![no_main]

use hjd_core::label::parse_label_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_label_list(data);
});

#![no_main]

use hjd_core::backend::parse_cache_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = parse_cache_line(data);
});

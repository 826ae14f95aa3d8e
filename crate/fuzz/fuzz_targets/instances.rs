#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(instances) = hjd_core::dataset::parse_instances(data) {
        for i in &instances {
            assert!(!i.uid.is_empty() && !i.premise.trim().is_empty() && !i.hypothesis.trim().is_empty());
        }
    }
});

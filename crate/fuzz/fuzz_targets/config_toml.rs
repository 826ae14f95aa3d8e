#![no_main]

use hjd_cli::config::{validate_config, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RunConfig::from_toml(data, None) {
        let _ = validate_config(&cfg);
        let _ = RunConfig::from_toml(&cfg.to_toml(), None);
    }
});

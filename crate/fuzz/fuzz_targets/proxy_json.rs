#![no_main]

use hjd_core::proxy::ProxyClassifier;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(model) = ProxyClassifier::from_json(data) {
        let again = ProxyClassifier::from_json(&model.to_json()).expect("serialized classifier reloads");
        assert_eq!(again.dim(), model.dim());
    }
});

#![no_main]

use jva_core::jva::JvaConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(overrides) = jva_core::io::parse_config(text) {
        let mut cfg = JvaConfig::default();
        overrides.apply(&mut cfg);
        let _ = cfg.validate();
    }
});

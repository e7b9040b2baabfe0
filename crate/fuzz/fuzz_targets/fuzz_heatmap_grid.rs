#![no_main]

use jva_core::gaze::decode_heatmap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(map) = jva_core::io::parse_heatmap_grid(text) else {
        return;
    };
    if let Ok(p) = decode_heatmap(&map, 2560.0, 1440.0) {
        assert!(p.within(2560.0, 1440.0));
    }
});

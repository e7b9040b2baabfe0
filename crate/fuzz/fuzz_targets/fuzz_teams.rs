#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(teams) = jva_core::io::parse_teams(data) {
        for meta in teams.values() {
            assert!((0.0..=5.0).contains(&meta.team_post_test()));
        }
    }
});

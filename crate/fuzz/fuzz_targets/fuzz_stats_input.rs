#![no_main]

use jva_core::io::{parse_stats_input, StatsInput};
use jva_core::report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_stats_input(text) {
        Ok(StatsInput::TeamResults(rows)) => {
            let _ = report::report_from_team_results(&rows).to_text();
        }
        Ok(StatsInput::Summary(fixture)) => {
            if let Ok(r) = report::report_from_fixture(&fixture) {
                let _ = r.to_text();
            }
        }
        Err(_) => {}
    }
});

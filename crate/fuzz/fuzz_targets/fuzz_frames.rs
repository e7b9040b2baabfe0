#![no_main]

use jva_core::jva::{session_jva, JvaConfig};
use jva_core::model::{Condition, GenderComposition, TeamMeta, TeamSession};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(load) = jva_core::io::parse_frames(data) else {
        return;
    };
    let cfg = JvaConfig::default();
    for (team, frames) in load.frames {
        let meta = TeamMeta {
            team_id: team,
            condition: Condition::Textbook,
            gender: GenderComposition::Mixed,
            post_test_scores: [0.0, 0.0],
        };
        if let Ok(r) = session_jva(&TeamSession::new(meta, frames), &cfg) {
            assert!((0.0..=1.0).contains(&r.jva_ratio));
        }
    }
});

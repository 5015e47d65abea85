#![no_main]

use indirect_pose::RobotKeypointModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = RobotKeypointModel::from_json(s);
    }
});

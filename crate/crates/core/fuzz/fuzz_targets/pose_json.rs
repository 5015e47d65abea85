#![no_main]

use indirect_pose::RigidTransform;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = RigidTransform::from_json(s);
    }
});

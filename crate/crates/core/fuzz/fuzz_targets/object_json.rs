#![no_main]

use indirect_pose::ObjectModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = ObjectModel::from_json(s);
    }
});

#![no_main]

use indirect_pose::harness::{read_records, write_records, OutputFormat};
use libfuzzer_sys::fuzz_target;

// first byte picks the format
fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else { return };
    let format = if sel & 1 == 0 {
        OutputFormat::Csv
    } else {
        OutputFormat::Json
    };
    let Ok(records) = read_records(rest, format) else {
        return;
    };
    let mut buf = Vec::new();
    write_records(&records, &mut buf, format).unwrap();
});

#![no_main]

use indirect_pose::belief::{read_affinity_stack, write_affinity_stack};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(stack) = read_affinity_stack(data) else { return };
    let mut buf = Vec::new();
    write_affinity_stack(&stack, &mut buf).unwrap();
    assert_eq!(read_affinity_stack(&buf).unwrap(), stack);
});

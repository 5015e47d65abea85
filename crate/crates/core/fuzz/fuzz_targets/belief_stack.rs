#![no_main]

use indirect_pose::belief::{extract_peaks, read_belief_stack, write_belief_stack, DEFAULT_THRESHOLD};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(stack) = read_belief_stack(data) else { return };
    let mut buf = Vec::new();
    write_belief_stack(&stack, &mut buf).unwrap();
    assert_eq!(read_belief_stack(&buf).unwrap(), stack);
    for p in extract_peaks(&stack, DEFAULT_THRESHOLD) {
        assert!(p.position.u.is_finite() && p.position.v.is_finite());
    }
});

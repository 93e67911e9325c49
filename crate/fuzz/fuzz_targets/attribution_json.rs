#![no_main]

use libfuzzer_sys::fuzz_target;
use speech_attrib::aggregate::{attribution_stats, sum_per_frame, sum_per_window};
use speech_attrib::attribution::attribution_from_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((tensor, _)) = attribution_from_json(text) {
        let n = tensor.num_windows();
        assert_eq!(sum_per_frame(&tensor).values().nrows(), n);
        assert_eq!(sum_per_window(&tensor).values().nrows(), n);
        let _ = attribution_stats(&tensor, n.min(10));
    }
});

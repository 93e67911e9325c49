#![no_main]

use libfuzzer_sys::fuzz_target;
use speech_attrib::aggregate::DisplayMode;
use speech_attrib::attribution::{Method, TargetSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mode) = text.parse::<DisplayMode>() {
        assert_eq!(mode.to_string().parse::<DisplayMode>().unwrap(), mode);
    }
    if let Ok(target) = text.parse::<TargetSpec>() {
        assert_eq!(target.to_string().parse::<TargetSpec>().unwrap(), target);
    }
    if let Ok(method) = text.parse::<Method>() {
        assert_eq!(method.to_string(), text);
    }
});

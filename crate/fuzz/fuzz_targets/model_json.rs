#![no_main]

use libfuzzer_sys::fuzz_target;
use speech_attrib::model::{model_from_json, model_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = model_from_json(text) {
        let again = model_from_json(&model_to_json(&model)).expect("re-encoded model parses");
        assert_eq!(again, model);
    }
});

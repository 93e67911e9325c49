#![no_main]

use libfuzzer_sys::fuzz_target;
use speech_attrib::features::{decode_wav, make_windows, MfccExtractor};

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = decode_wav(data) {
        assert!(clip.samples().iter().all(|s| (-1.0..=1.0).contains(s)));
        if let Ok(mfcc) = MfccExtractor::new().compute(&clip) {
            assert_eq!(make_windows(&mfcc).len(), mfcc.num_frames());
        }
    }
});

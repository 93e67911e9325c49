use std::fs;
use std::path::{Path, PathBuf};

use speech_attrib::aggregate::DisplayMode;
use speech_attrib::attribution::{attribution_from_json, TargetSpec};
use speech_attrib::features::decode_wav;
use speech_attrib::model::model_from_json;
use speech_attrib::Error;

fn corpus(target: &str, name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target).join(name)
}

fn text(target: &str, name: &str) -> String {
    fs::read_to_string(corpus(target, name)).unwrap()
}

#[test]
fn wav_seeds() {
    let read = |name| decode_wav(fs::read(corpus("decode_wav", name)).unwrap().as_slice());
    assert_eq!(read("mono16k.wav").unwrap().len(), 700);
    assert_eq!(read("short.wav").unwrap().len(), 100);
    assert!(matches!(read("rate44k.wav"), Err(Error::UnsupportedSampleRate(44_100))));
    assert!(matches!(read("stereo.wav"), Err(Error::UnsupportedFormat(_))));
    assert!(matches!(read("pcm8.wav"), Err(Error::UnsupportedFormat(_))));
    assert!(read("truncated.wav").is_err());
}

#[test]
fn model_seeds() {
    let tiny = model_from_json(&text("model_json", "tiny.json")).unwrap();
    assert_eq!(tiny.num_layers(), 2);
    assert!(matches!(
        model_from_json(&text("model_json", "wrong_outputs.json")),
        Err(Error::DimensionMismatch(_))
    ));
    assert!(matches!(model_from_json(&text("model_json", "truncated.json")), Err(Error::Parse(_))));
}

#[test]
fn attribution_seeds() {
    let (t, cfg) = attribution_from_json(&text("attribution_json", "one_window.json")).unwrap();
    assert_eq!(t.num_windows(), 1);
    assert_eq!(cfg["epsilon"], 0.0001);
    assert_eq!(attribution_from_json(&text("attribution_json", "saliency_two.json")).unwrap().0.num_windows(), 2);
    assert!(attribution_from_json(&text("attribution_json", "bad_shape.json")).is_err());
}

#[test]
fn option_seeds() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/option_specs");
    let mut parsed = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let s = fs::read_to_string(entry.unwrap().path()).unwrap();
        parsed += usize::from(s.parse::<DisplayMode>().is_ok()) + usize::from(s.parse::<TargetSpec>().is_ok());
    }
    // relative:9, per-frame, per-window, argmax and five char targets.
    assert_eq!(parsed, 9);
}

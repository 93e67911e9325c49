//! Audio ingestion, MFCC extraction and context-window assembly.

mod mfcc;
mod wav;
mod windows;

pub use mfcc::{
    compute_mfcc, MfccExtractor, MfccMatrix, FRAME_LENGTH, FRAME_STRIDE, LOG_FLOOR, NUM_FILTERS,
    NUM_MFCC, PRE_EMPHASIS,
};
pub use wav::{decode_wav, read_wav, write_wav, AudioClip, SAMPLE_RATE};
pub use windows::{make_windows, FrameWindow, CONTEXT, WINDOW_FEATURES, WINDOW_ROWS};

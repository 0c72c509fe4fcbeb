//! Smoking-gesture detection from wrist accelerometer streams.
//!
//! Windows of 20 samples are classified into four mini-gestures (non-smoking,
//! hand-to-lip, hand-on-lip, hand-off-lip) by a small MLP or a single-timestep
//! stacked LSTM. The resulting token stream is parsed by a state-transition
//! grammar into puffs, which are grouped into sessions.

pub mod dataset;
pub mod eval;
pub mod numerics;
pub mod synth;
pub mod grammar;
pub mod models;

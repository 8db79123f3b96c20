//! Face detection and tracking for event cameras, driven by eye blinks.

pub mod activity;
pub mod cli;
pub mod config;
pub mod correlator;
pub mod detector;
pub mod error;
pub mod eval;
pub mod event_io;
pub mod model;
pub mod noise_filter;
pub mod pipeline;
pub mod scenes;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};

//! File formats, presets and the command-line driver around
//! [`micromaser_core`].
//!
//! A run is described by a TOML [`config::RunConfig`]; [`scenario`] adds
//! named series on top (the shipped figure presets are scenarios), [`run`]
//! executes them and [`output`] writes CSV tables and a JSON manifest.

pub mod config;
pub mod output;
pub mod run;
pub mod scenario;
pub mod sweep;
pub mod validate;

pub use micromaser_core as core;

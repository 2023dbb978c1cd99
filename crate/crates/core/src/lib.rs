//! Model-free control: algebraic derivative estimation, ultra-local models
//! and intelligent PID controllers, with benchmark plants and a closed-loop
//! simulator.

pub mod config;
pub mod control;
pub mod diagnostics;
pub mod differentiator;
pub mod error;
pub mod plants;
pub mod scenarios;
pub mod simloop;
pub mod trajectory;
pub mod ultra_local;

pub use error::{Error, Result};

//! Command line entry points and the HTTP gateway for a live engine.

pub mod commands;
pub mod dictionary;
pub mod gateway;

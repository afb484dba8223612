//! HTTP API, slippy-tile server and command-line front end for the
//! NightPulse analytics engine.
//!
//! Both surfaces call the same [`ops::Engine`] methods, so a result fetched
//! over HTTP carries exactly the bytes the CLI prints.

pub mod api;
pub mod cli;
pub mod config;
pub mod ops;
pub mod store;
pub mod tiles;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book {}

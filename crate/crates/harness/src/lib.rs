//! Experiment harness: seeded oracle runs, blocking statistics, and the
//! `viewclean` command line.

pub mod blocking;
pub mod cli;
pub mod experiment;

//! File formats, parallel Monte Carlo drivers and the command-line front end
//! for [`switchcir_core`].

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod ldp;
pub mod output;


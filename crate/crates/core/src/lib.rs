pub mod acquisition;
pub mod design;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod normal;
pub mod linear;
pub mod schedule;
pub mod objectives;
pub mod bo;
pub mod diagnostics;
pub mod config;
pub mod cli;

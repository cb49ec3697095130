//! Independent checks: the chain-rule oracle, manufactured-solution
//! convergence studies and a generator of compatible initial data.

pub mod data;
pub mod mms;
pub mod oracle;

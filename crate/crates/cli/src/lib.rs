//! Library surface of the CLI: command implementations and verification
//! oracles, reusable by the acceptance suite.

pub mod oracles;
pub mod output;
pub mod run;

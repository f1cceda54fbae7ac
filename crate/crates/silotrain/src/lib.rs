//! Process-level plumbing around `silotrain_core`: wall clocks, key files,
//! PGM directory ingestion, framed TCP, spool watching, and the experiment
//! harness behind the `silotrain` binary.

pub mod clock;
pub mod harness;
pub mod ingest;
pub mod keyfile;
pub mod spool;
pub mod tcp;

//! Instrument surfaces: config files, CSV output, the command session, the TCP
//! server and the command-line runner.

pub mod cli;
pub mod config_file;
pub mod csv;
pub mod server;
pub mod session;

pub use cli::{run_cli, run_cli_with};
pub use config_file::{ExperimentConfig, ProtocolDefaults};
pub use csv::{fmt_float, CsvTable};
pub use server::{Server, ServerHandle, SessionFactory, MAX_LINE};
pub use session::{ErrorCode, InstrumentSession, Key, Reply};

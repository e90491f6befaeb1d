//! Wire protocol, servers and a concurrent client for multi-server PIR.

pub mod bench;
pub mod client;
pub mod frame;
pub mod payload;
pub mod server;

pub use client::{NetError, PirClient, Quorum};
pub use frame::Frame;
pub use server::{PirServer, TcpServer};

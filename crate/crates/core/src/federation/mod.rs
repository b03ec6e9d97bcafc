//! Federated execution: an honest broker and two data providers exchanging
//! framed messages. Plain fragments run at the providers, sliced and secure
//! operators in the oblivious engine at the broker.

pub mod audit;
mod broker;
pub mod exec;
pub mod message;
pub mod provider;
pub mod transport;

pub use audit::{audit, AuditReport};
pub use broker::{run_plan, run_query, QueryOutput, RunOptions};
pub use message::{decode, encode, KeyFilter, Message};
pub use provider::{DataProvider, Fragment};
pub use transport::{Endpoint, Envelope, TransportKind};

//! Fading, decodability, outage tables, and rate adaptation.

mod decode;
mod outage;
mod rates;
mod sampling;
mod tables;

pub use decode::{capacity, decodable, Message};
pub use outage::{pu_decode_fail, pu_outage, su_outage, Estimate};
pub use rates::{optimize_rates_centralized, optimize_rates_decentralized};
pub use sampling::{n_links, sample_snrs, stream, DrawBlock, SnrDraw};
pub use tables::{
    expected_throughput, KnowledgeModel, OutageTables, RateRule, RateTable, SystemTables,
};

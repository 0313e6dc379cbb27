//! Detection and analysis of ultrafast extreme events (mini flash crashes and
//! spikes) in trade and quote tapes.
//!
//! The pipeline is: [`ingest`] delimited tapes into per-symbol-day streams,
//! [`detect`] monotonic price runs that meet the event criteria, then measure
//! quote behaviour ([`quotes`]), post-event recovery ([`recovery`]) and
//! aggregate statistics ([`report`]). [`synth`] builds synthetic tapes with
//! planted events for validation.

pub mod clock;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod price;
pub mod quotes;
pub mod recovery;
pub mod report;
pub mod synth;

pub use clock::{session_of, Nanos, TradingSession};
pub use detect::{detect_all, detect_events, monotonic_runs, uee_return, DetectionCriteria, Direction, MonotonicRun, UeeEvent};
pub use error::{Error, Result};
pub use ingest::{parse_quotes, parse_trades, InputFormat, QuoteDay, QuoteRecord, TradeDay, TradeRecord, ValidationReport};
pub use price::Price;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::clock::format_clock;
use crate::detect::{DetectionCriteria, UeeEvent};
use crate::error::{Error, Result};

pub const EVENT_SCHEMA: &str = "ueescan.events.v1";

pub const EVENT_CSV_HEADER: &str = "id,symbol,date,direction,start_index,change_index,end_index,\
t_start,t_change,t_end,s_start,s_change,s_end,trade_count,trade_count_end,duration_ns,r_uee";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDocument {
    pub schema: String,
    pub criteria: DetectionCriteria,
    pub events: Vec<UeeEvent>,
}

pub fn events_to_csv(events: &[UeeEvent], criteria: &DetectionCriteria) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# schema={EVENT_SCHEMA} threshold={:.9} min_trades={} max_duration_ns={} strict={}",
        criteria.threshold, criteria.min_trades, criteria.max_duration, criteria.strict
    );
    out.push_str(EVENT_CSV_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.9}",
            e.id(),
            e.symbol,
            e.date,
            e.direction,
            e.start_index,
            e.change_index,
            e.end_index,
            format_clock(e.t_start),
            format_clock(e.t_change),
            format_clock(e.t_end),
            e.s_start,
            e.s_change,
            e.s_end,
            e.trade_count,
            e.trade_count_end,
            e.duration,
            e.r_uee,
        );
    }
    out
}

pub fn events_to_json(events: &[UeeEvent], criteria: &DetectionCriteria) -> String {
    let doc = EventDocument { schema: EVENT_SCHEMA.to_string(), criteria: *criteria, events: events.to_vec() };
    let mut s = serde_json::to_string_pretty(&doc).expect("events serialize");
    s.push('\n');
    s
}

pub fn events_from_json(text: &str) -> Result<EventDocument> {
    let doc: EventDocument = serde_json::from_str(text)?;
    if doc.schema != EVENT_SCHEMA {
        return Err(Error::Format(format!("unsupported event schema {:?}", doc.schema)));
    }
    Ok(doc)
}

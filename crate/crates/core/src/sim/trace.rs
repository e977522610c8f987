use super::{RunSummary, SimError, TraceRecord};
use std::io::Write;

pub const TRACE_HEADER: &str = "stage,measured_density,action,outcome,utility,posterior_fragile,likelihood_ratio,policy_id";

/// Writes the trace as CSV; absent readings and ratios are empty fields.
pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER.split(','))?;
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, summary: &RunSummary) -> Result<(), SimError> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

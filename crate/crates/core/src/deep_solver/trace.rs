use std::io::Write;

use super::{ReconstructionResult, RestartRecord};
use crate::{Result, Scalar};

/// Writes `iteration,restart,loss,grad_norm_1..grad_norm_L` rows for every restart.
/// The final row of each restart carries the end-of-run loss and empty gradient columns.
pub fn write_trace_csv<T: Scalar, W: Write>(result: &ReconstructionResult<T>, out: &mut W) -> Result<()> {
    write_restart_traces(&result.restarts, result.estimates.len(), out)
}

/// Same layout as [`write_trace_csv`] for bare restart records; `sources`
/// sets the column count when no gradient norms were recorded.
pub fn write_restart_traces<T: Scalar, W: Write>(restarts: &[RestartRecord<T>], sources: usize, out: &mut W) -> Result<()> {
    let width = restarts.iter().flat_map(|r| r.grad_norms.iter().map(Vec::len)).max().unwrap_or(sources);
    write!(out, "iteration,restart,loss")?;
    for l in 1..=width {
        write!(out, ",grad_norm_{l}")?;
    }
    writeln!(out)?;
    for (r, rec) in restarts.iter().enumerate() {
        for (it, loss) in rec.loss_trace.iter().enumerate() {
            write!(out, "{it},{r},{:e}", loss.as_f64())?;
            let norms = rec.grad_norms.get(it);
            for l in 0..width {
                match norms.and_then(|n| n.get(l)) {
                    Some(v) => write!(out, ",{:e}", v.as_f64())?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

use std::io::{self, Write};

use super::TrajectoryRecord;

pub const TRAJECTORY_HEADER: &str = "path_index,t";

/// Write records as CSV: a comment line carrying the fingerprint and seed,
/// a header, then one row per recorded point. Interior rows carry status
/// `running`; the last row of each path carries its final status.
pub fn write_trajectories<W: Write>(mut w: W, records: &[TrajectoryRecord], fingerprint: &str, seed: u64) -> io::Result<()> {
    writeln!(w, "# fingerprint={fingerprint} seed={seed}")?;
    let m = records.first().map_or(0, |r| r.points[0].len());
    let mut header = String::from(TRAJECTORY_HEADER);
    for i in 1..=m {
        header.push_str(&format!(",x{i}"));
    }
    header.push_str(",status");
    writeln!(w, "{header}")?;
    for r in records {
        let last = r.points.len() - 1;
        for (k, (t, x)) in r.times.iter().zip(&r.points).enumerate() {
            write!(w, "{},{:.17e}", r.path_index, t)?;
            for xi in x.iter() {
                write!(w, ",{xi:.17e}")?;
            }
            let status = if k == last { r.status.label() } else { "running".into() };
            writeln!(w, ",{status}")?;
        }
    }
    Ok(())
}

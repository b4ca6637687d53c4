//! Per-iteration records of the inner and outer loops.

use std::fmt;
use std::io::Write;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Relaxation that seeds the inner iteration.
    Bootstrap,
    Active,
    /// Active stage re-solved from the previous outer iterate.
    Warm,
    Passive,
    /// End of an outer iteration; `objective` is the accepted power.
    Outer,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Bootstrap => "bootstrap",
            Stage::Active => "active",
            Stage::Warm => "warm",
            Stage::Passive => "passive",
            Stage::Outer => "outer",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub stage: Stage,
    pub iter: usize,
    /// Transmit power for active rows, slack margin for passive rows.
    pub objective: f64,
    /// `w1` (active) or `u` (passive) trace ratio parameter.
    pub ratio1: f64,
    /// `w2` trace ratio parameter, `NaN` for passive rows.
    pub ratio2: f64,
    pub eps_step: f64,
    pub feasible: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub const CSV_HEADER: &'static str = "outer_iter,stage,iter,objective,ratio1,ratio2,eps_step,feasible,wall_ms";

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: IterationTrace) {
        self.rows.extend(other.rows);
    }

    /// Accepted power after each completed outer iteration.
    pub fn outer_objectives(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.stage == Stage::Outer).map(|r| r.objective).collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{:.3}",
                r.outer_iter, r.stage, r.iter, r.objective, r.ratio1, r.ratio2, r.eps_step, r.feasible, r.wall_ms
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let mut t = IterationTrace::default();
        for k in 0..3 {
            t.push(TraceRow {
                outer_iter: 1,
                stage: if k == 2 { Stage::Outer } else { Stage::Active },
                iter: k,
                objective: 10.0 - k as f64,
                ratio1: 0.5,
                ratio2: 0.5,
                eps_step: 0.1,
                feasible: true,
                wall_ms: 1.0,
            });
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], IterationTrace::CSV_HEADER);
        assert_eq!(lines[3].split(',').count(), 9);
        assert_eq!(t.outer_objectives(), vec![8.0]);
    }
}

//! Plain-text summary of a run directory.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use crate::pipeline::{RunManifest, RunStatus};
use crate::stages::{read_csv, DisplacementRow, WinnerRow, WINNER_FILE};

pub fn summarize(dir: &Path) -> Result<String> {
    let manifest = RunManifest::load(dir)?;
    let mut s = String::new();
    writeln!(s, "run        {}", dir.display())?;
    writeln!(s, "config     {}", manifest.config_hash)?;
    writeln!(s, "seed       {}", manifest.seed)?;
    match manifest.status {
        RunStatus::Complete => writeln!(s, "status     complete")?,
        RunStatus::Incomplete => writeln!(
            s,
            "status     incomplete (failed at {}: {})",
            manifest.failed_stage.as_deref().unwrap_or("?"),
            manifest.error.as_deref().unwrap_or("no error recorded")
        )?,
    }
    writeln!(s, "\nstages")?;
    for st in &manifest.stages {
        writeln!(s, "  {:<14} {:>8.3} s  {:>5} outputs", st.name, st.seconds, st.outputs)?;
    }

    let disp = dir.join("analyze").join("displacements.csv");
    if disp.exists() {
        let rows: Vec<DisplacementRow> = read_csv(&disp)?;
        let passing = rows.iter().filter(|r| r.pass).count();
        writeln!(s, "\nshell analysis: {passing}/{} within the deflection limit", rows.len())?;
        for r in &rows {
            writeln!(
                s,
                "  {:<6} {:>8.3} mm / {:.1} mm  {}",
                r.model_id,
                r.max_displacement_mm,
                r.deflection_limit_mm,
                if r.pass { "pass" } else { "FAIL" }
            )?;
        }
    }

    let winner = dir.join("optimize").join(WINNER_FILE);
    if winner.exists() {
        match read_csv::<WinnerRow>(&winner) {
            Ok(rows) if !rows.is_empty() => {
                let w = &rows[0];
                writeln!(
                    s,
                    "\nshelter winner: {} ({}) score {:.2}, {} load-bearing + {} formwork columns ({} removed), {:.3} mm / {:.1} mm",
                    w.candidate_id,
                    w.anchor_kind,
                    w.weighted_score,
                    w.load_bearing_columns,
                    w.formwork_columns,
                    w.formwork_removed,
                    w.max_displacement_mm,
                    w.deflection_limit_mm
                )?;
            }
            _ => writeln!(s, "\nshelter winner: none (every candidate rejected)")?,
        }
    }
    Ok(s)
}

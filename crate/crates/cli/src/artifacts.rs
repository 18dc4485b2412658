//! Artifact writers: trace CSV/JSON pairs, pretty-printed JSON summaries,
//! and gnuplot script emitters. Nothing here embeds timestamps; file bytes
//! are a pure function of the data.

use std::path::Path;

use serde::Serialize;

use illposed_core::engine::IterationTrace;

use crate::commands::{CellData, CellOutcome};
use crate::error::CliError;

/// Trace JSON wrapper with run metadata.
#[derive(Serialize)]
struct TraceDocument<'a> {
    problem: &'a str,
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_noise_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lipschitz_noisy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop_index: Option<usize>,
    trace: &'a IterationTrace,
}

pub fn cell_stem(level: f64, seed: u64) -> String {
    format!("noisy_d{level:e}_s{seed}")
}

/// Writes `<stem>.csv` and `<stem>.json` under `out_dir/traces/`.
pub fn write_trace_files(
    out_dir: &Path,
    problem: &str,
    cell: Option<&CellData>,
    trace: &IterationTrace,
) -> Result<(), CliError> {
    let traces_dir = out_dir.join("traces");
    std::fs::create_dir_all(&traces_dir)?;
    let stem = match cell {
        Some(cell) => cell_stem(cell.key.level, cell.key.seed),
        None => "exact".to_string(),
    };
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    std::fs::write(traces_dir.join(format!("{stem}.csv")), csv)?;

    let document = TraceDocument {
        problem,
        kind: if cell.is_some() { "noisy" } else { "exact" },
        data_noise_level: cell.map(|c| c.key.level),
        delta: cell.map(|c| c.noisy.delta()),
        psi_delta: cell.map(|c| c.noisy.psi_delta()),
        lipschitz_noisy: cell.map(|c| c.noisy.lipschitz_noisy()),
        seed: cell.map(|c| c.key.seed),
        stop_index: cell.map(|c| c.stop_index),
        trace,
    };
    write_json(&traces_dir.join(format!("{stem}.json")), &document)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Script plotting error against iteration for the exact run and every
/// completed cell; reads the CSVs written next to it.
pub fn gnuplot_run_script(cells: &[CellOutcome]) -> String {
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    script.push_str("set logscale y\n");
    script.push_str("set xlabel 'iteration k'\n");
    script.push_str("set ylabel 'error to solution'\n");
    script.push_str("set key outside\n");
    script.push_str("plot 'traces/exact.csv' using 1:2 skip 1 with lines title 'exact'");
    for outcome in cells {
        if let CellOutcome::Ran(cell) = outcome {
            let stem = cell_stem(cell.key.level, cell.key.seed);
            script.push_str(&format!(
                ", \\\n     'traces/{stem}.csv' using 1:2 skip 1 with lines title '{stem}'"
            ));
        }
    }
    script.push('\n');
    script
}

/// Script plotting the study medians against the noise level.
pub fn gnuplot_study_script() -> String {
    "set datafile separator ','\n\
     set logscale xy\n\
     set xlabel 'data noise level'\n\
     set ylabel 'median final error'\n\
     plot 'study_medians.csv' using 1:2 skip 1 with linespoints title 'median final error'\n"
        .to_string()
}

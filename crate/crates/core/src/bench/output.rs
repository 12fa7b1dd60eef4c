//! CSV and JSON writers for experiment results.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::ExperimentResult;

pub const CSV_HEADER: &str =
    "algorithm,T,seed,checkpoint_t,cum_regret,epoch_count,good_event_ok,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

/// One row per checkpoint of every cell. Failed cells keep the checkpoints
/// they reached.
pub fn to_csv(result: &ExperimentResult) -> String {
    let mut out = String::with_capacity(64 * (1 + result.cells.len() * 8));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        let ge = match c.good_event_ok {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        for cp in &c.checkpoints {
            // {:?} on f64 prints the shortest representation that round-trips
            let _ = writeln!(
                out,
                "{},{},{},{},{:?},{},{},{}",
                c.algorithm, c.horizon, c.seed, cp.t, cp.cum_regret, c.epoch_count, ge, c.wall_ms
            );
        }
    }
    out
}

pub fn to_json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ExperimentResult> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(result: &ExperimentResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => Ok(to_csv(result)),
        OutputFormat::Json => to_json(result),
    }
}

pub fn write_output(result: &ExperimentResult, path: &Path, format: OutputFormat) -> Result<()> {
    let text = render(result, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write every file named in the config's `[output]` section.
pub fn emit_outputs(result: &ExperimentResult) -> Result<()> {
    if let Some(p) = &result.config.output.csv {
        write_output(result, p, OutputFormat::Csv)?;
    }
    if let Some(p) = &result.config.output.json {
        write_output(result, p, OutputFormat::Json)?;
    }
    Ok(())
}

use serde::Serialize;
use std::io::Write;

use super::mala::{ChainOutput, SampleRecord};
use crate::error::Result;

/// One line of a chain file.
#[derive(Serialize)]
pub struct JsonlRecord<'a> {
    pub chain: &'a str,
    #[serde(flatten)]
    pub record: &'a SampleRecord,
}

/// Write each retained sample of `out` as one JSON object per line.
pub fn write_jsonl<W: Write>(chain: &str, out: &ChainOutput, mut writer: W) -> Result<()> {
    for record in &out.records {
        serde_json::to_writer(&mut writer, &JsonlRecord { chain, record })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

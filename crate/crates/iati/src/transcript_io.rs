//! Line-delimited JSON transcripts: a `header` record followed by one `round`
//! record per round.

use std::io::{BufRead, Write};

use iati_core::transcript::{RoundLog, TranscriptHeader};
use iati_core::Transcript;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header(TranscriptHeader),
    Round(RoundLog),
}

pub fn write_transcript<W: Write>(mut out: W, transcript: &Transcript) -> Result<(), HarnessError> {
    serde_json::to_writer(&mut out, &Record::Header(transcript.header.clone()))?;
    out.write_all(b"\n")?;
    for round in &transcript.rounds {
        serde_json::to_writer(&mut out, &Record::Round(round.clone()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Transcript, HarnessError> {
    let mut header = None;
    let mut rounds = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| HarnessError::Transcript {
            line: i + 1,
            reason,
        };
        let record: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match record {
            Record::Header(h) if header.is_none() && rounds.is_empty() => header = Some(h),
            Record::Header(_) => {
                return Err(bad("header must be the first and only header record".into()))
            }
            Record::Round(_) if header.is_none() => return Err(bad("round before header".into())),
            Record::Round(r) => rounds.push(r),
        }
    }
    let header = header.ok_or(HarnessError::Transcript {
        line: 0,
        reason: "empty transcript".into(),
    })?;
    let transcript = Transcript { header, rounds };
    transcript.validate()?;
    Ok(transcript)
}

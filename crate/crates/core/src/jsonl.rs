//! Line-delimited JSON record reading with line-numbered errors.

use std::io::BufRead;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Parses one JSON object per non-blank line. Returned tuples carry the
/// 1-based line number of each record.
pub fn read_records<R: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, R)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: describe(&e),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

// serde_json appends " at line L column C" (position within this one line),
// and quotes field names with backticks.
fn describe(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let msg = match msg.rfind(" at line ") {
        Some(pos) => &msg[..pos],
        None => &msg,
    };
    msg.replace('`', "")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize)]
    struct Rec {
        #[allow(dead_code)]
        a: u32,
    }

    #[test]
    fn line_numbers_skip_blanks() {
        let data = "{\"a\":1}\n\n{\"a\":2}\n";
        let recs: Vec<(usize, Rec)> = read_records(data.as_bytes()).unwrap();
        assert_eq!(recs.iter().map(|r| r.0).collect::<Vec<_>>(), [1, 3]);
    }

    #[test]
    fn missing_field_message() {
        let data = "{\"a\":1}\n{}\n";
        let err = read_records::<Rec>(data.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: missing field a");
    }
}

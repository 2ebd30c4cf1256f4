//! JSON-lines readers and writers shared by all file interfaces.

use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Read one JSON object per line; blank lines are skipped. Parse failures
/// carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    read_jsonl_from(reader)
}

pub fn read_jsonl_from<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|source| Error::Json {
            line: idx + 1,
            source,
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Write one JSON object per line, newline-terminated.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| Error::Json { line: 0, source })?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{QuestionRecord, TaskMode};

    #[test]
    fn round_trip_through_a_temp_file() {
        let records = vec![QuestionRecord {
            id: "q1".to_string(),
            prompt: "p".to_string(),
            options: None,
            answer_key: "42".to_string(),
            mode: TaskMode::OpenBoxed,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        write_jsonl(&path, &records).unwrap();
        let back: Vec<QuestionRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let data = "{\"id\":\"a\",\"prompt\":\"p\",\"answer_key\":\"1\",\"mode\":\"open_boxed\"}\nnot json\n";
        let err = read_jsonl_from::<QuestionRecord>(data.as_bytes()).unwrap_err();
        match err {
            Error::Json { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Json error, got {other:?}"),
        }
    }

    #[test]
    fn blank_lines_are_skipped() {
        let data = "\n{\"id\":\"a\",\"prompt\":\"p\",\"answer_key\":\"1\",\"mode\":\"open_boxed\"}\n\n";
        let items: Vec<QuestionRecord> = read_jsonl_from(data.as_bytes()).unwrap();
        assert_eq!(items.len(), 1);
    }
}

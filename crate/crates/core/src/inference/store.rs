//! Append-only JSONL result store.
//!
//! One [`ComparisonRecord`] per line. A crash can leave a torn final line;
//! opening the store for appending cuts it off so the run can resume. A
//! malformed line anywhere else is treated as corruption.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ComparisonRecord;
use crate::error::{Error, Result};

/// A task that produced no record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub task_key: String,
    /// transport | capability | task | numeric
    pub kind: String,
    pub message: String,
    pub attempts: u32,
    pub ts: String,
}

struct Parsed {
    records: Vec<ComparisonRecord>,
    /// Byte length of the well-formed prefix.
    valid_len: u64,
    torn: bool,
}

fn parse(path: &Path, text: &str) -> Result<Parsed> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut rest = text;
    let mut line_no = 0;
    while !rest.is_empty() {
        line_no += 1;
        let (line, consumed, terminated) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1, true),
            None => (rest, rest.len(), false),
        };
        if !line.trim().is_empty() {
            match serde_json::from_str::<ComparisonRecord>(line) {
                Ok(r) => records.push(r),
                Err(_) if !terminated => {
                    return Ok(Parsed {
                        records,
                        valid_len: offset as u64,
                        torn: true,
                    })
                }
                Err(e) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: e.to_string(),
                    })
                }
            }
        }
        offset += consumed;
        rest = &rest[consumed..];
    }
    Ok(Parsed {
        records,
        valid_len: offset as u64,
        torn: false,
    })
}

/// Reads every record of a store. A torn final line is ignored with a warning.
pub fn read_records(path: &Path) -> Result<Vec<ComparisonRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let parsed = parse(path, &text)?;
    if parsed.torn {
        log::warn!("{}: ignoring incomplete final line", path.display());
    }
    Ok(parsed.records)
}

pub struct ResultStore {
    path: PathBuf,
    writer: BufWriter<File>,
    errors_path: PathBuf,
    errors: Option<BufWriter<File>>,
    completed: HashSet<String>,
}

impl ResultStore {
    /// Opens (creating if needed) a store for appending.
    pub fn open(path: &Path) -> Result<Self> {
        let io = |what: &str, e| Error::io(format!("{what} {}", path.display()), e);
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| io("creating directory for", e))?;
        }
        let mut completed = HashSet::new();
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| io("reading", e))?;
            let parsed = parse(path, &text)?;
            if parsed.torn {
                log::warn!("{}: truncating incomplete final line", path.display());
                let file = OpenOptions::new().write(true).open(path).map_err(|e| io("opening", e))?;
                file.set_len(parsed.valid_len).map_err(|e| io("truncating", e))?;
            } else if !text.is_empty() && !text.ends_with('\n') {
                // complete JSON but no newline: terminate it before appending
                let mut file = OpenOptions::new().append(true).open(path).map_err(|e| io("opening", e))?;
                file.write_all(b"\n").map_err(|e| io("writing", e))?;
            }
            for r in parsed.records {
                if !completed.insert(r.task_key.clone()) {
                    return Err(Error::Validation(format!(
                        "{}: task {} appears more than once",
                        path.display(),
                        r.task_key
                    )));
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io("opening", e))?;
        Ok(ResultStore {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            errors_path: errors_path_for(path),
            errors: None,
            completed,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Sibling log of failed tasks: `<stem>.errors.jsonl`.
    pub fn errors_path(&self) -> &Path {
        &self.errors_path
    }

    pub fn contains(&self, task_key: &str) -> bool {
        self.completed.contains(task_key)
    }

    pub fn len(&self) -> usize {
        self.completed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completed.is_empty()
    }

    /// Appends and flushes one record. A key already present is rejected.
    pub fn append(&mut self, record: &ComparisonRecord) -> Result<()> {
        if self.completed.contains(&record.task_key) {
            return Err(Error::Validation(format!(
                "task {} already has a record",
                record.task_key
            )));
        }
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::io(format!("appending to {}", self.path.display()), e))?;
        self.completed.insert(record.task_key.clone());
        Ok(())
    }

    pub fn append_error(&mut self, entry: &ErrorEntry) -> Result<()> {
        let ctx = || format!("appending to {}", self.errors_path.display());
        if self.errors.is_none() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.errors_path)
                .map_err(|e| Error::io(ctx(), e))?;
            self.errors = Some(BufWriter::new(file));
        }
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        let writer = self.errors.as_mut().expect("opened above");
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io(ctx(), e))
    }
}

fn errors_path_for(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("store");
    path.with_file_name(format!("{stem}.errors.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key: &str) -> ComparisonRecord {
        ComparisonRecord {
            task_key: key.into(),
            firm_a: "A".into(),
            firm_b: "B".into(),
            category: "baseline".into(),
            variant: 1,
            order: 1,
            rep: 1,
            chosen: "A".into(),
            confidence: 0.75,
            l_first: -0.2876820724517809,
            l_second: -1.3862943611198906,
            backend_id: "test".into(),
            model_id: "m".into(),
            ts: "2024-01-01T00:00:00.000Z".into(),
        }
    }

    #[test]
    fn append_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut store = ResultStore::open(&path).unwrap();
        store.append(&record("k1")).unwrap();
        store.append(&record("k2")).unwrap();
        assert!(store.append(&record("k1")).is_err());
        drop(store);

        let store = ResultStore::open(&path).unwrap();
        assert_eq!(store.len(), 2);
        assert!(store.contains("k2"));
        let back = read_records(&path).unwrap();
        assert_eq!(back, vec![record("k1"), record("k2")]);
    }

    #[test]
    fn torn_final_line_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let good = serde_json::to_string(&record("k1")).unwrap();
        fs::write(&path, format!("{good}\n{{\"task_key\":\"k2\",\"fir")).unwrap();
        assert_eq!(read_records(&path).unwrap().len(), 1);

        let mut store = ResultStore::open(&path).unwrap();
        assert_eq!(store.len(), 1);
        store.append(&record("k2")).unwrap();
        drop(store);
        assert_eq!(read_records(&path).unwrap(), vec![record("k1"), record("k2")]);
    }

    #[test]
    fn corrupt_middle_line_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let good = serde_json::to_string(&record("k1")).unwrap();
        fs::write(&path, format!("{good}\nnot json\n{good}\n")).unwrap();
        match ResultStore::open(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other.map(|s| s.len())),
        }
    }

    #[test]
    fn errors_go_to_sibling_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let mut store = ResultStore::open(&path).unwrap();
        store
            .append_error(&ErrorEntry {
                task_key: "k".into(),
                kind: "task".into(),
                message: "boom".into(),
                attempts: 1,
                ts: "t".into(),
            })
            .unwrap();
        assert_eq!(store.errors_path(), dir.path().join("run.errors.jsonl"));
        let text = fs::read_to_string(store.errors_path()).unwrap();
        assert!(text.contains("\"boom\""));
    }
}

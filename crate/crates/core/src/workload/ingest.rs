use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::spec::IngestMode;
use crate::error::{Error, Result};
use crate::model::{KeyId, Message};

/// Assigns dense ids, starting at 1, to tokens in order of first appearance.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<String, KeyId>,
    labels: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> KeyId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        self.labels.push(token.to_owned());
        let id = self.labels.len() as KeyId;
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub fn label(&self, id: KeyId) -> Option<&str> {
        let idx = usize::try_from(id).ok()?.checked_sub(1)?;
        self.labels.get(idx).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Messages read from a file, with the token table for text modes.
#[derive(Clone, Debug, Default)]
pub struct Ingested {
    pub messages: Vec<Message>,
    /// `None` for edge lists, whose integer vertex ids are used as keys directly.
    pub interner: Option<Interner>,
}

pub fn ingest(path: &Path, mode: IngestMode) -> Result<Ingested> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    ingest_reader(BufReader::new(file), path, mode)
}

/// Parses `reader` as if it were the file at `path` (used in error messages).
pub fn ingest_reader<R: Read>(reader: R, path: &Path, mode: IngestMode) -> Result<Ingested> {
    let reader = BufReader::new(reader);
    let mut messages = Vec::new();
    let mut interner = Interner::new();
    let push = |messages: &mut Vec<Message>, key: KeyId, source_key: Option<KeyId>| {
        messages.push(Message {
            timestamp: messages.len() as u64,
            key,
            source_key,
        });
    };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                Error::Ingest {
                    path: path.to_owned(),
                    line: lineno,
                    message: "line is not valid UTF-8".into(),
                }
            } else {
                Error::Io {
                    path: path.to_owned(),
                    source: e,
                }
            }
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        match mode {
            IngestMode::KeyPerLine => {
                if !line.is_empty() {
                    let key = interner.intern(line);
                    push(&mut messages, key, None);
                }
            }
            IngestMode::TokenizedText => {
                for token in line.split_whitespace() {
                    let key = interner.intern(token);
                    push(&mut messages, key, None);
                }
            }
            IngestMode::EdgeListInverted => {
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                let (src, dst) = parse_edge(trimmed).ok_or_else(|| Error::Ingest {
                    path: path.to_owned(),
                    line: lineno,
                    message: format!("expected 'src dst' integer pair, got '{trimmed}'"),
                })?;
                push(&mut messages, dst, Some(src));
            }
        }
    }

    Ok(Ingested {
        messages,
        interner: (mode != IngestMode::EdgeListInverted).then_some(interner),
    })
}

fn parse_edge(line: &str) -> Option<(u64, u64)> {
    let mut it = line.split_whitespace();
    let src = it.next()?.parse().ok()?;
    let dst = it.next()?.parse().ok()?;
    it.next().is_none().then_some((src, dst))
}

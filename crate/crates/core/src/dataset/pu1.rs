//! Loader for the PU1 directory layout: `<root>/part<1..k>/<file>` where each
//! file is a whitespace-tokenized message whose first line may start with a
//! literal `Subject:` token.

use std::fs;
use std::path::Path;

use super::{DatasetError, Document, Label};

/// Loads every message under the `part<N>` subdirectories of `root`.
///
/// A file is labelled spam iff its name contains `spam_name_pattern`
/// (the published corpus convention uses `spmsg`). The fold index is taken
/// from the subdirectory name. Files are visited in (fold, filename) order so
/// the resulting document sequence is deterministic.
pub fn load_pu1(root: &Path, spam_name_pattern: &str) -> Result<Vec<Document>, DatasetError> {
    let entries = fs::read_dir(root).map_err(|e| {
        DatasetError::Corpus(format!("cannot open corpus root {}: {e}", root.display()))
    })?;

    let mut parts: Vec<(usize, std::path::PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::Io {
            path: root.to_path_buf(),
            source: e,
        })?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(idx) = name.strip_prefix("part").and_then(|s| s.parse::<usize>().ok()) {
            if idx >= 1 {
                parts.push((idx, path));
            }
        }
    }
    if parts.is_empty() {
        return Err(DatasetError::Corpus(format!(
            "no part<N> subdirectories under {}",
            root.display()
        )));
    }
    parts.sort();

    let mut docs = Vec::new();
    for (fold, dir) in parts {
        let mut files: Vec<std::path::PathBuf> = fs::read_dir(&dir)
            .map_err(|e| DatasetError::Io {
                path: dir.clone(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();

        for path in files {
            let bytes = fs::read(&path).map_err(|e| DatasetError::Io {
                path: path.clone(),
                source: e,
            })?;
            let text = String::from_utf8_lossy(&bytes);
            let tokens = tokenize_message(&text);
            let file_name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let label = if file_name.contains(spam_name_pattern) {
                Label::Spam
            } else {
                Label::Legit
            };
            docs.push(Document {
                tokens,
                label,
                origin_fold: Some(fold),
                source_id: format!("part{fold}/{file_name}"),
            });
        }
    }
    if docs.is_empty() {
        return Err(DatasetError::Corpus(format!(
            "no message files under {}",
            root.display()
        )));
    }
    Ok(docs)
}

/// Whitespace tokenization over the whole message; the leading `Subject:`
/// marker is dropped while the subject words themselves are kept as ordinary
/// tokens.
fn tokenize_message(text: &str) -> Vec<String> {
    let mut tokens = text.split_whitespace();
    let mut out: Vec<String> = Vec::new();
    if let Some(first) = tokens.next() {
        if first != "Subject:" {
            out.push(first.to_owned());
        }
    }
    out.extend(tokens.map(str::to_owned));
    out
}

//! Cohort manifests: one case per line as `id pred gt`, separated by commas
//! or whitespace. `#` starts a comment. Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseEntry {
    pub id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

pub fn parse(text: &str, base: &Path) -> Result<Vec<CaseEntry>, String> {
    let mut out: Vec<CaseEntry> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let [id, pred, gt] = fields[..] else {
            return Err(format!(
                "manifest line {}: expected 'id pred gt', got {} fields",
                n + 1,
                fields.len()
            ));
        };
        if out.iter().any(|c| c.id == id) {
            return Err(format!("manifest line {}: case id {id} repeats", n + 1));
        }
        out.push(CaseEntry {
            id: id.to_string(),
            pred: base.join(pred),
            gt: base.join(gt),
        });
    }
    Ok(out)
}

/// Case id of an explicitly listed prediction: its file name without
/// `.nii` / `.nii.gz`.
pub fn case_id(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".nii.gz", ".nii"] {
        if let Some(stem) = name.strip_suffix(ext) {
            return stem.to_string();
        }
    }
    name
}

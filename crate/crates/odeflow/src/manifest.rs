use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One emitted file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, contents: impl Into<Vec<u8>>) -> Self {
        OutputFile { name: name.into(), contents: contents.into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Written last; lists every other file with its digest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    /// Digest over `name\0sha256\n` of every file in order.
    pub content_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn build(experiment: &str, seed: u64, config: serde_json::Value, files: &[OutputFile]) -> Self {
        let files: Vec<FileEntry> = files
            .iter()
            .map(|f| FileEntry { name: f.name.clone(), bytes: f.contents.len() as u64, sha256: sha256_hex(&f.contents) })
            .collect();
        let mut hasher = Sha256::new();
        for f in &files {
            hasher.update(f.name.as_bytes());
            hasher.update([0]);
            hasher.update(f.sha256.as_bytes());
            hasher.update(b"\n");
        }
        let content_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Manifest { experiment: experiment.to_owned(), seed, config, files, content_hash }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    /// Names of listed files whose current contents no longer match.
    pub fn verify<'a>(&'a self, read: impl Fn(&str) -> Option<Vec<u8>>) -> Vec<&'a str> {
        self.files
            .iter()
            .filter(|f| read(&f.name).map(|c| sha256_hex(&c) != f.sha256).unwrap_or(true))
            .map(|f| f.name.as_str())
            .collect()
    }
}

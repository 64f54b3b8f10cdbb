//! Dataset manifests: which file, which label, which split.
//!
//! Text format, one record per line after a `#` header:
//!
//! ```text
//! # hqnn-manifest v1
//! # seed 42
//! # source <free text>
//! normal/normal_000.png	0	train
//! ```
//!
//! Paths are relative to the directory holding the manifest unless
//! absolute. Blank lines are ignored.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::split::{stratified_split, Split};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "# hqnn-manifest v1";

/// Directory name per label.
pub const CLASS_NAMES: [&str; 2] = ["normal", "malignant"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<Record>,
    pub seed: u64,
    pub source: String,
    /// Base for relative record paths; not serialised.
    pub root: PathBuf,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

impl DatasetManifest {
    /// Scans `<root>/<class>/*.png` and assigns an 80:20 stratified split.
    /// Records from `test_root`, in the same layout, form the test split.
    pub fn from_directory(root: &Path, seed: u64, test_root: Option<&Path>) -> Result<Self> {
        let mut records = Vec::new();
        for (label, name) in CLASS_NAMES.iter().enumerate() {
            let dir = root.join(name);
            if !dir.is_dir() {
                return Err(Error::data(format!("missing class directory {}", dir.display())));
            }
            for p in image_files(&dir)? {
                let rel = p.strip_prefix(root).unwrap_or(&p).to_path_buf();
                records.push(Record { path: rel, label, split: Split::Train });
            }
        }
        let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
        for (r, s) in records.iter_mut().zip(stratified_split(&labels, (80, 20), seed)?) {
            r.split = s;
        }
        if let Some(t) = test_root {
            let t = if t.is_absolute() { t.to_path_buf() } else { std::env::current_dir().map_err(|e| Error::file(t, e))?.join(t) };
            for (label, name) in CLASS_NAMES.iter().enumerate() {
                let dir = t.join(name);
                if dir.is_dir() {
                    for p in image_files(&dir)? {
                        records.push(Record { path: p, label, split: Split::Test });
                    }
                }
            }
        }
        let m = Self {
            records,
            seed,
            source: format!("directory {}", root.display()),
            root: root.to_path_buf(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if r.label >= CLASS_NAMES.len() {
                return Err(Error::data(format!("label {} for {}", r.label, r.path.display())));
            }
            if !seen.insert(self.resolve(r)) {
                return Err(Error::data(format!("{} listed twice", r.path.display())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, r: &Record) -> PathBuf {
        self.root.join(&r.path)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.records.len()).filter(|&i| self.records[i].split == split).collect()
    }

    /// Per-class counts within a split.
    pub fn counts(&self, split: Split) -> [usize; 2] {
        let mut c = [0; 2];
        for r in self.records.iter().filter(|r| r.split == split) {
            c[r.label] += 1;
        }
        c
    }

    pub fn summary(&self) -> String {
        [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|&s| {
                let c = self.counts(s);
                format!("{s}: {} ({} normal, {} malignant)", c[0] + c[1], c[0], c[1])
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MANIFEST_HEADER}\n# seed {}\n# source {}\n", self.seed, self.source);
        for r in &self.records {
            s.push_str(&format!("{}\t{}\t{}\n", r.path.display(), r.label, r.split));
        }
        s
    }

    pub fn parse(text: &str, root: &Path) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(MANIFEST_HEADER) {
            return Err(Error::data(format!("manifest must start with {MANIFEST_HEADER:?}")));
        }
        let (mut seed, mut source, mut records) = (None, String::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# seed ") {
                seed = Some(rest.trim().parse::<u64>().map_err(|_| Error::data(format!("bad seed line {line:?}")))?);
                continue;
            }
            if let Some(rest) = line.strip_prefix("# source ") {
                source = rest.to_string();
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let bad = || Error::data(format!("manifest line {}: {line:?}", n + 2));
            let mut f = line.split('\t');
            let (p, l, s) = (f.next().ok_or_else(bad)?, f.next().ok_or_else(bad)?, f.next().ok_or_else(bad)?);
            if f.next().is_some() {
                return Err(bad());
            }
            records.push(Record {
                path: PathBuf::from(p),
                label: l.parse().map_err(|_| bad())?,
                split: s.parse().map_err(|_| bad())?,
            });
        }
        let m = Self {
            records,
            seed: seed.ok_or_else(|| Error::data("manifest lacks a seed line"))?,
            source,
            root: root.to_path_buf(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch_layout(root: &Path, n: [usize; 2]) {
        for (c, name) in CLASS_NAMES.iter().enumerate() {
            fs::create_dir_all(root.join(name)).unwrap();
            for i in 0..n[c] {
                image::RgbImage::new(2, 2).save(root.join(name).join(format!("{i:03}.png"))).unwrap();
            }
            fs::write(root.join(name).join("notes.txt"), "ignored").unwrap();
        }
    }

    #[test]
    fn directory_scan_split_and_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        touch_layout(dir.path(), [10, 10]);
        let m = DatasetManifest::from_directory(dir.path(), 42, None).unwrap();
        assert_eq!(m.records.len(), 20);
        assert_eq!(m.counts(Split::Train), [8, 8]);
        assert_eq!(m.counts(Split::Val), [2, 2]);
        assert!(m.indices(Split::Test).is_empty());
        let p = dir.path().join("manifest.tsv");
        m.write(&p).unwrap();
        assert_eq!(DatasetManifest::read(&p).unwrap(), m);
        assert!(m.resolve(&m.records[0]).exists());
    }

    #[test]
    fn test_directory_is_used_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let test = tempfile::tempdir().unwrap();
        touch_layout(dir.path(), [4, 4]);
        touch_layout(test.path(), [3, 2]);
        let m = DatasetManifest::from_directory(dir.path(), 1, Some(test.path())).unwrap();
        assert_eq!(m.counts(Split::Test), [3, 2]);
        assert!(m.records.iter().filter(|r| r.split == Split::Test).all(|r| m.resolve(r).exists()));
    }

    #[test]
    fn malformed_manifests_are_data_errors() {
        let root = Path::new(".");
        assert!(matches!(DatasetManifest::parse("a\t0\ttrain\n", root), Err(Error::Data(_))));
        let head = format!("{MANIFEST_HEADER}\n# seed 1\n");
        assert!(DatasetManifest::parse(&format!("{head}a\t0\n"), root).is_err());
        assert!(DatasetManifest::parse(&format!("{head}a\t5\ttrain\n"), root).is_err());
        assert!(DatasetManifest::parse(&format!("{head}a\t0\ttrain\na\t1\tval\n"), root).is_err());
        assert!(DatasetManifest::parse(&format!("{MANIFEST_HEADER}\na\t0\ttrain\n"), root).is_err());
        let ok = DatasetManifest::parse(&format!("{head}\na\t0\ttrain\n"), root).unwrap();
        assert_eq!(ok.records.len(), 1);
    }

    #[test]
    fn missing_class_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("normal")).unwrap();
        assert!(matches!(DatasetManifest::from_directory(dir.path(), 0, None), Err(Error::Data(_))));
    }
}

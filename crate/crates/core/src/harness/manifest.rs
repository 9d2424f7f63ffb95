use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::MixtureScene;
use crate::signal::{load_wav, Waveform};

/// One manifest line. Relative paths are resolved against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub mixture_path: PathBuf,
    pub enrollment_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interference_path: Option<PathBuf>,
    /// Mixing SNR, recorded by `synth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

/// A sample ready for search. `scene` is present when the target is known.
#[derive(Debug, Clone)]
pub struct LoadedEntry {
    pub mixture: Waveform,
    pub enrollment: Waveform,
    pub scene: Option<MixtureScene>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::config(format!("duplicate manifest id {:?}", e.id)));
            }
        }
        Ok(Self {
            entries,
            base_dir: base_dir.into(),
        })
    }

    /// Reads a JSONL manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file =
            fs::File::open(path).map_err(|e| Error::config(format!("cannot open manifest {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry =
                serde_json::from_str(&line).map_err(|e| Error::config(format!("manifest line {}: {e}", n + 1)))?;
            entries.push(entry);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::new(entries, base)?;
        for e in &manifest.entries {
            for p in manifest.paths(e) {
                if !p.is_file() {
                    return Err(Error::config(format!("entry {:?}: missing file {}", e.id, p.display())));
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.push(b'\n');
        }
        fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn paths(&self, e: &ManifestEntry) -> Vec<PathBuf> {
        [
            Some(&e.mixture_path),
            Some(&e.enrollment_path),
            e.target_path.as_ref(),
            e.interference_path.as_ref(),
        ]
        .into_iter()
        .flatten()
        .map(|p| self.resolve(p))
        .collect()
    }

    /// Ids of entries without a target signal.
    pub fn entries_without_target(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.target_path.is_none())
            .map(|e| e.id.as_str())
            .collect()
    }

    pub fn entries_without_interference(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.interference_path.is_none())
            .map(|e| e.id.as_str())
            .collect()
    }

    pub fn load_entry(&self, e: &ManifestEntry) -> Result<LoadedEntry> {
        let mixture = load_wav(self.resolve(&e.mixture_path))?;
        let enrollment = load_wav(self.resolve(&e.enrollment_path))?;
        let scene = match &e.target_path {
            Some(t) => {
                let interference = e
                    .interference_path
                    .as_ref()
                    .map(|p| load_wav(self.resolve(p)))
                    .transpose()?;
                Some(MixtureScene::new(
                    mixture.clone(),
                    load_wav(self.resolve(t))?,
                    interference,
                    enrollment.clone(),
                    e.snr_db,
                )?)
            }
            None => None,
        };
        Ok(LoadedEntry {
            mixture,
            enrollment,
            scene,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            mixture_path: "m.wav".into(),
            enrollment_path: "e.wav".into(),
            target_path: None,
            interference_path: None,
            snr_db: None,
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(Manifest::new(vec![entry("a"), entry("b")], ".").is_ok());
        assert!(matches!(
            Manifest::new(vec![entry("a"), entry("a")], "."),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn missing_files_rejected_and_paths_resolved() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::new(vec![entry("a")], dir.path()).unwrap();
        let path = dir.path().join("manifest.jsonl");
        m.save(&path).unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Config(_))));

        let w = Waveform::new(vec![0.5, -0.25, 0.125], 16_000).unwrap();
        crate::signal::save_wav(&w, dir.path().join("m.wav")).unwrap();
        crate::signal::save_wav(&w, dir.path().join("e.wav")).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        assert_eq!(loaded.entries, m.entries);
        let got = loaded.load_entry(&loaded.entries[0]).unwrap();
        assert_eq!(got.mixture, w);
        assert!(got.scene.is_none());
        assert_eq!(loaded.entries_without_target(), vec!["a"]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"mixture_path\":\"m\",\"enrollment_path\":\"e\",\"speaker\":3}\n",
        )
        .unwrap();
        assert!(matches!(Manifest::load(&path), Err(Error::Config(_))));
    }
}

//! Corpus selection: screen, rank, and emit the initial seed corpus.
//!
//! Three criteria gate admission: the generator script executed to
//! completion with output, the seed passes the format sniffer, and the seed
//! fits the size cap. Admitted seeds are ranked lexicographically — format
//! compliance, execution success, size ascending, provenance order — so
//! selection is a pure deterministic function of its inputs, and smaller
//! valid seeds come first for mutation throughput.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::{self, FormatTag, Sniff};
use crate::synthesis::{SandboxStatus, SeedArtifact};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedVerdict {
    pub executed_ok: bool,
    pub format_ok: bool,
    pub size_ok: bool,
    /// Sniffer reason when `format_ok` is false.
    pub malformed_reason: Option<String>,
}

impl SeedVerdict {
    pub fn admitted(&self) -> bool {
        self.executed_ok && self.format_ok && self.size_ok
    }
}

/// Judge one artifact against the three admission criteria.
pub fn evaluate(artifact: &SeedArtifact, format: FormatTag, max_bytes: usize) -> SeedVerdict {
    let executed_ok = artifact.status == SandboxStatus::Produced && !artifact.bytes.is_empty();
    let (format_ok, malformed_reason) = match formats::sniff(format, &artifact.bytes) {
        Sniff::Compliant => (true, None),
        Sniff::Malformed(reason) => (false, Some(reason)),
    };
    SeedVerdict {
        executed_ok,
        format_ok,
        size_ok: artifact.size() <= max_bytes,
        malformed_reason,
    }
}

/// Rank key exposed so alternative scorers can hook in: ascending sort on
/// (format failed, execution failed, size, provenance order).
pub fn rank_key(artifact: &SeedArtifact, provenance_order: usize) -> (bool, bool, usize, usize) {
    let v = artifact.verdict.as_ref().expect("verdict filled before ranking");
    (!v.format_ok, !v.executed_ok, artifact.size(), provenance_order)
}

/// Screen and rank artifacts into the initial corpus.
///
/// Content-duplicate seeds collapse onto their earliest provenance. The
/// result holds at most `corpus_size` artifacts, every one of which executed
/// cleanly, passed the sniffer, and fits `max_bytes`.
pub fn select(
    artifacts: Vec<SeedArtifact>,
    corpus_size: usize,
    max_bytes: usize,
    format: FormatTag,
) -> Result<Vec<SeedArtifact>> {
    assert!(corpus_size >= 1, "select requires corpus_size >= 1");
    // Dedup in provenance order, keeping the first appearance of each payload.
    let mut seen_bytes: std::collections::HashSet<Vec<u8>> = std::collections::HashSet::new();
    let mut deduped: Vec<(usize, SeedArtifact)> = Vec::new();
    for (order, mut artifact) in artifacts.into_iter().enumerate() {
        artifact.verdict = Some(evaluate(&artifact, format, max_bytes));
        if !artifact.bytes.is_empty() && !seen_bytes.insert(artifact.bytes.clone()) {
            continue;
        }
        deduped.push((order, artifact));
    }

    let mut admitted: Vec<(usize, SeedArtifact)> = deduped
        .into_iter()
        .filter(|(_, a)| a.verdict.as_ref().map(SeedVerdict::admitted).unwrap_or(false))
        .collect();
    admitted.sort_by(|(oa, a), (ob, b)| rank_key(a, *oa).cmp(&rank_key(b, *ob)));

    if admitted.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    admitted.truncate(corpus_size);
    Ok(admitted.into_iter().map(|(_, a)| a).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifestEntry {
    pub rank: usize,
    pub file: String,
    pub size: usize,
    pub candidate_index: u32,
    pub draw_index: u32,
    pub verdict: SeedVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: FormatTag,
    pub entries: Vec<CorpusManifestEntry>,
}

pub const CORPUS_MANIFEST_FILE: &str = "manifest.json";

/// Write `seed-<rank>.bin` files plus a manifest recording provenance and
/// verdicts. Deterministic: rewriting the same corpus yields identical bytes.
pub fn write_corpus(corpus: &[SeedArtifact], format: FormatTag, dir: &Path) -> Result<CorpusManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.len());
    for (rank, artifact) in corpus.iter().enumerate() {
        let file = format!("seed-{rank}.bin");
        std::fs::write(dir.join(&file), &artifact.bytes)?;
        entries.push(CorpusManifestEntry {
            rank,
            file,
            size: artifact.size(),
            candidate_index: artifact.candidate_index,
            draw_index: artifact.draw_index,
            verdict: artifact.verdict.clone().expect("selected seeds carry verdicts"),
        });
    }
    let manifest = CorpusManifest {
        format,
        entries,
    };
    std::fs::write(
        dir.join(CORPUS_MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(dir.join(CORPUS_MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Read corpus seed bytes back in rank order. Falls back to sorted file
/// names when no manifest is present, so hand-built corpora work too.
pub fn read_corpus_dir(dir: &Path) -> Result<Vec<Vec<u8>>> {
    if dir.join(CORPUS_MANIFEST_FILE).is_file() {
        let manifest = load_manifest(dir)?;
        return manifest
            .entries
            .iter()
            .map(|e| std::fs::read(dir.join(&e.file)).map_err(Error::Io))
            .collect();
    }
    let mut names: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    names.sort();
    names.into_iter().map(|p| std::fs::read(p).map_err(Error::Io)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::mini_doc_file;
    use tempfile::TempDir;

    fn artifact(bytes: Vec<u8>, cand: u32, draw: u32, status: SandboxStatus) -> SeedArtifact {
        SeedArtifact {
            bytes,
            candidate_index: cand,
            draw_index: draw,
            status,
            verdict: None,
        }
    }

    fn doc_seed(payload: &[u8]) -> Vec<u8> {
        mini_doc_file(&[(b'T', payload)])
    }

    #[test]
    fn select_keeps_only_admissible_seeds_sorted_by_size() {
        let mut artifacts = Vec::new();
        // 12 admissible seeds of varying size.
        for i in 0..12u32 {
            let payload: Vec<u8> = (0..i as u8 + 1).collect();
            artifacts.push(artifact(doc_seed(&payload), i, 0, SandboxStatus::Produced));
        }
        // 18 inadmissible: failures, malformed bytes, oversize.
        for i in 0..6u32 {
            artifacts.push(artifact(Vec::new(), 100 + i, 0, SandboxStatus::ExecFailed));
            artifacts.push(artifact(b"not a doc".to_vec(), 200 + i, 0, SandboxStatus::Produced));
            artifacts.push(artifact(doc_seed(&vec![0u8; 200]), 300 + i, 0, SandboxStatus::Produced));
        }
        let corpus = select(artifacts, 10, 64, FormatTag::MiniDoc).unwrap();
        assert_eq!(corpus.len(), 10);
        for seed in &corpus {
            let v = seed.verdict.as_ref().unwrap();
            assert!(v.admitted());
        }
        let sizes: Vec<usize> = corpus.iter().map(|s| s.size()).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "sizes nondecreasing: {sizes:?}");
    }

    #[test]
    fn all_oversized_artifacts_mean_empty_corpus() {
        let artifacts = vec![
            artifact(doc_seed(&[1; 100]), 0, 0, SandboxStatus::Produced),
            artifact(doc_seed(&[2; 120]), 1, 0, SandboxStatus::Produced),
        ];
        assert!(matches!(
            select(artifacts, 10, 16, FormatTag::MiniDoc),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn byte_identical_seeds_collapse_to_earliest_provenance() {
        let artifacts = vec![
            artifact(doc_seed(b"same"), 3, 1, SandboxStatus::Produced),
            artifact(doc_seed(b"same"), 0, 0, SandboxStatus::Produced),
            artifact(doc_seed(b"other"), 5, 2, SandboxStatus::Produced),
        ];
        let corpus = select(artifacts, 10, 1024, FormatTag::MiniDoc).unwrap();
        assert_eq!(corpus.len(), 2);
        let same = corpus.iter().find(|s| s.bytes == doc_seed(b"same")).unwrap();
        assert_eq!((same.candidate_index, same.draw_index), (3, 1));
    }

    #[test]
    fn oversize_status_is_never_admitted_even_if_bytes_look_fine() {
        let artifacts = vec![artifact(doc_seed(b"ok"), 0, 0, SandboxStatus::Oversize)];
        assert!(matches!(
            select(artifacts, 1, 1024, FormatTag::MiniDoc),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn write_corpus_emits_one_file_per_seed_plus_manifest() {
        let artifacts: Vec<SeedArtifact> = (0..10u32)
            .map(|i| {
                let payload = vec![i as u8; (i + 1) as usize];
                artifact(doc_seed(&payload), i, 0, SandboxStatus::Produced)
            })
            .collect();
        let corpus = select(artifacts, 10, 1024, FormatTag::MiniDoc).unwrap();
        let dir = TempDir::new().unwrap();
        let manifest = write_corpus(&corpus, FormatTag::MiniDoc, dir.path()).unwrap();
        assert_eq!(manifest.entries.len(), 10);
        for entry in &manifest.entries {
            assert!(dir.path().join(&entry.file).is_file());
        }

        // Rewrite: byte-identical files and manifest.
        let before = std::fs::read(dir.path().join(CORPUS_MANIFEST_FILE)).unwrap();
        let seed0_before = std::fs::read(dir.path().join("seed-0.bin")).unwrap();
        write_corpus(&corpus, FormatTag::MiniDoc, dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join(CORPUS_MANIFEST_FILE)).unwrap(), before);
        assert_eq!(std::fs::read(dir.path().join("seed-0.bin")).unwrap(), seed0_before);

        // Manifest round-trip preserves provenance records.
        let reloaded = load_manifest(dir.path()).unwrap();
        assert_eq!(reloaded, manifest);

        // Reading the corpus dir returns seeds in rank order.
        let seeds = read_corpus_dir(dir.path()).unwrap();
        assert_eq!(seeds.len(), 10);
        assert_eq!(seeds[0], corpus[0].bytes);
    }
}

//! Test-set manifests: which clean file is mixed with which noise section at which SNR.
//!
//! On disk a manifest is UTF-8 text with one tab-separated record per line:
//! `clean_path  noise_path  snr_db  noise_offset  output_path`. Lines starting with `#`
//! carry the generating seed and SNR grid and are otherwise ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mix::mix_at_snr;
use super::wav::{load_wav, save_wav, wav_len};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub clean_path: PathBuf,
    pub noise_path: PathBuf,
    pub snr_db: f64,
    pub noise_offset: usize,
    /// Relative to the output directory.
    pub output_path: PathBuf,
}

impl MixSpec {
    /// Grouping key for score tables: the noise file stem.
    pub fn noise_name(&self) -> String {
        stem(&self.noise_path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub snr_grid: Vec<f64>,
    pub entries: Vec<MixSpec>,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `*.wav` files directly inside `dir`, sorted by file name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_wav = path
            .extension()
            .map(|e| e.to_string_lossy().eq_ignore_ascii_case("wav"))
            .unwrap_or(false);
        if is_wav && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// For every noise file, `per_noise_count` clean files are drawn without replacement and
/// each pair is expanded over `snr_grid`; every entry gets its own uniformly drawn
/// noise offset.
pub fn build_test_manifest(
    clean_dir: &Path,
    noise_dir: &Path,
    per_noise_count: usize,
    snr_grid: &[f64],
    seed: u64,
) -> Result<Manifest> {
    if snr_grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    if let Some(s) = snr_grid.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite SNR level {s}")));
    }
    let clean = list_wavs(clean_dir)?;
    let noise = list_wavs(noise_dir)?;
    if clean.is_empty() {
        return Err(Error::invalid(format!("no .wav files in {}", clean_dir.display())));
    }
    if noise.is_empty() {
        return Err(Error::invalid(format!("no .wav files in {}", noise_dir.display())));
    }
    if per_noise_count == 0 || per_noise_count > clean.len() {
        return Err(Error::invalid(format!(
            "insufficient clean files: need {per_noise_count}, found {}",
            clean.len()
        )));
    }
    let clean_lens = clean.iter().map(|p| wav_len(p)).collect::<Result<Vec<_>>>()?;
    let noise_lens = noise.iter().map(|p| wav_len(p)).collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(noise.len() * per_noise_count * snr_grid.len());
    for (noise_path, &noise_len) in noise.iter().zip(&noise_lens) {
        let picked = sample(&mut rng, clean.len(), per_noise_count);
        for ci in picked.iter() {
            let clean_len = clean_lens[ci];
            if clean_len == 0 || clean_len > noise_len {
                return Err(Error::invalid(format!(
                    "{} ({noise_len} samples) cannot cover {} ({clean_len} samples)",
                    noise_path.display(),
                    clean[ci].display()
                )));
            }
            for &snr_db in snr_grid {
                let noise_offset = rng.random_range(0..=noise_len - clean_len);
                let output_path =
                    PathBuf::from(format!("{}_{}_{}dB.wav", stem(noise_path), stem(&clean[ci]), snr_db));
                entries.push(MixSpec {
                    clean_path: clean[ci].clone(),
                    noise_path: noise_path.clone(),
                    snr_db,
                    noise_offset,
                    output_path,
                });
            }
        }
    }
    Ok(Manifest { seed, snr_grid: snr_grid.to_vec(), entries })
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# seed={}", self.seed).unwrap();
        let grid: Vec<String> = self.snr_grid.iter().map(|v| v.to_string()).collect();
        writeln!(s, "# snr_grid={}", grid.join(",")).unwrap();
        for e in &self.entries {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                e.clean_path.display(),
                e.noise_path.display(),
                e.snr_db,
                e.noise_offset,
                e.output_path.display()
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut seed = 0;
        let mut snr_grid = Vec::new();
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::format(origin, format!("line {}: {msg}", i + 1));
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some(v) = meta.strip_prefix("seed=") {
                    seed = v.parse().map_err(|_| bad("bad seed"))?;
                } else if let Some(v) = meta.strip_prefix("snr_grid=") {
                    snr_grid = v
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("bad snr_grid"))?;
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad(&format!("expected 5 tab-separated fields, found {}", cols.len())));
            }
            entries.push(MixSpec {
                clean_path: PathBuf::from(cols[0]),
                noise_path: PathBuf::from(cols[1]),
                snr_db: cols[2].parse().map_err(|_| bad("bad snr_db"))?,
                noise_offset: cols[3].parse().map_err(|_| bad("bad noise_offset"))?,
                output_path: PathBuf::from(cols[4]),
            });
        }
        Ok(Self { seed, snr_grid, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Mixes every entry and writes the noisy signal to `out_dir/output_path`. Entries are
/// independent, so file contents do not depend on `jobs`.
pub fn render_manifest(manifest: &Manifest, out_dir: &Path, jobs: usize) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| {
        manifest.entries.par_iter().try_for_each(|e| {
            let clean = load_wav(&e.clean_path)?;
            let noise = load_wav(&e.noise_path)?;
            let mix = mix_at_snr(&clean, &noise, e.snr_db, e.noise_offset)?;
            save_wav(&mix.noisy, &out_dir.join(&e.output_path))
        })
    })
}

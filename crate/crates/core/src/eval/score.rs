//! Per-condition WER tables over a test manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::wer::{wer, Transcript};
use crate::corpus::Manifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub noise: String,
    pub snr_db: f64,
    pub n: usize,
    pub wer_percent: f64,
}

fn read_transcript(path: &Path, entry: usize, what: &str) -> Result<Transcript> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("manifest entry {entry}: {what} {}: {e}", path.display())))?;
    Ok(Transcript::new(&text))
}

/// Mean WER per (noise, SNR) condition. References are looked up as
/// `ref_dir/<clean stem>.txt` and hypotheses as `hyp_dir/<output stem>.txt`. Rows are
/// ordered by noise name, then SNR.
pub fn score_manifest(manifest: &Manifest, ref_dir: &Path, hyp_dir: &Path) -> Result<Vec<ScoreRow>> {
    let per_entry: Vec<(String, f64, f64)> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let r = read_transcript(&ref_dir.join(format!("{}.txt", stem(&e.clean_path))), i, "reference")?;
            let h = read_transcript(&hyp_dir.join(format!("{}.txt", stem(&e.output_path))), i, "hypothesis")?;
            let rec = wer(&r, &h).map_err(|err| Error::invalid(format!("manifest entry {i}: {err}")))?;
            Ok((e.noise_name(), e.snr_db, rec.wer))
        })
        .collect::<Result<_>>()?;

    let mut keyed = per_entry;
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut rows: Vec<ScoreRow> = Vec::new();
    for (noise, snr_db, w) in keyed {
        match rows.last_mut() {
            Some(row) if row.noise == noise && row.snr_db == snr_db => {
                row.n += 1;
                row.wer_percent += w;
            }
            _ => rows.push(ScoreRow { noise, snr_db, n: 1, wer_percent: w }),
        }
    }
    for row in rows.iter_mut() {
        row.wer_percent /= row.n as f64;
    }
    Ok(rows)
}

/// `noise,snr_db,n,wer_percent` with two decimals.
pub fn scores_to_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::from("noise,snr_db,n,wer_percent\n");
    for r in rows {
        writeln!(s, "{},{},{},{:.2}", r.noise, r.snr_db, r.n, r.wer_percent).unwrap();
    }
    s
}

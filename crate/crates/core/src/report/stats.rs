//! Corpus statistics: per-file token counts and the pitch histogram.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::kern::{is_separator, parse_lenient, tokenize, TokenFilter};
use crate::model::{Pitch, Step};

use super::ReportError;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub file_count: usize,
    pub token_counts: Vec<(String, u64)>,
    pub mean_tokens: f64,
    /// Population standard deviation of the per-file token counts.
    pub stddev_tokens: f64,
    pub pitch_histogram: BTreeMap<(i32, Step), u64>,
    pub skipped: Vec<String>,
}

impl CorpusStats {
    pub fn total_pitch_tokens(&self) -> u64 {
        self.pitch_histogram.values().sum()
    }
}

/// Scans a directory of kern files, counting data tokens per file
/// (separators excluded) and building the spelled-pitch histogram over all
/// note events, chords included.
pub fn corpus_stats(dir: &Path, filter: &TokenFilter) -> Result<CorpusStats, ReportError> {
    let files = super::read_dir_kern_files(dir)?;
    let mut token_counts = Vec::new();
    let mut pitch_histogram: BTreeMap<(i32, Step), u64> = BTreeMap::new();
    let mut skipped = Vec::new();
    for path in files {
        let name = file_name(&path);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(err) => {
                skipped.push(format!("{name}: {err}"));
                continue;
            }
        };
        let tokens = tokenize(&text, filter);
        let count = tokens.iter().filter(|t| !is_separator(t)).count() as u64;
        token_counts.push((name, count));

        let (score, _) = parse_lenient(&text);
        for part in &score.parts {
            for m in &part.measures {
                for n in &m.notes {
                    *pitch_histogram
                        .entry((n.pitch.octave, n.pitch.step))
                        .or_default() += 1;
                }
            }
        }
    }
    let n = token_counts.len();
    let mean = if n == 0 {
        0.0
    } else {
        token_counts.iter().map(|(_, c)| *c as f64).sum::<f64>() / n as f64
    };
    let variance = if n == 0 {
        0.0
    } else {
        token_counts
            .iter()
            .map(|(_, c)| {
                let d = *c as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64
    };
    Ok(CorpusStats {
        file_count: n,
        token_counts,
        mean_tokens: mean,
        stddev_tokens: variance.sqrt(),
        pitch_histogram,
        skipped,
    })
}

fn file_name(path: &PathBuf) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `pitch,count` rows ordered by pitch height (octave, then step).
pub fn render_pitch_histogram_csv(stats: &CorpusStats) -> String {
    let mut out = String::from("pitch,count\n");
    for ((octave, step), count) in &stats.pitch_histogram {
        out.push_str(&format!("{},{count}\n", Pitch::new(*step, *octave)));
    }
    out
}

/// Human-readable summary block.
pub fn render_stats_summary(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("files: {}\n", stats.file_count));
    out.push_str(&format!(
        "tokens per file: mean {:.6}, population sd {:.6}\n",
        stats.mean_tokens, stats.stddev_tokens
    ));
    out.push_str(&format!("pitch tokens: {}\n", stats.total_pitch_tokens()));
    out.push_str(&format!(
        "distinct pitches: {}\n",
        stats.pitch_histogram.len()
    ));
    if !stats.skipped.is_empty() {
        out.push_str(&format!("skipped files: {}\n", stats.skipped.len()));
        for s in &stats.skipped {
            out.push_str(&format!("  {s}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn mean_and_population_sigma() {
        let dir = tempfile::tempdir().unwrap();
        // 10 data tokens and 20 data tokens (header and terminator count too)
        let mut f1 = fs::File::create(dir.path().join("a.krn")).unwrap();
        write!(f1, "**kern\n{}*-", "4c\n".repeat(8)).unwrap();
        let mut f2 = fs::File::create(dir.path().join("b.krn")).unwrap();
        write!(f2, "**kern\n{}*-", "4c\n".repeat(18)).unwrap();
        let stats = corpus_stats(dir.path(), &TokenFilter::full()).unwrap();
        assert_eq!(stats.file_count, 2);
        assert_eq!(stats.token_counts[0].1, 10);
        assert_eq!(stats.token_counts[1].1, 20);
        assert!((stats.mean_tokens - 15.0).abs() < 1e-12);
        assert!((stats.stddev_tokens - 5.0).abs() < 1e-12);
    }

    #[test]
    fn chord_pitches_count_individually() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = fs::File::create(dir.path().join("m.krn")).unwrap();
        write!(f, "**kern\n4c 4c 4d\n*-").unwrap();
        let stats = corpus_stats(dir.path(), &TokenFilter::full()).unwrap();
        assert_eq!(stats.pitch_histogram.get(&(4, Step::C)), Some(&2));
        assert_eq!(stats.pitch_histogram.get(&(4, Step::D)), Some(&1));
        let csv = render_pitch_histogram_csv(&stats);
        assert_eq!(csv, "pitch,count\nC4,2\nD4,1\n");
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let stats = corpus_stats(dir.path(), &TokenFilter::full()).unwrap();
        assert_eq!(stats.file_count, 0);
        assert!(stats.pitch_histogram.is_empty());
        assert_eq!(stats.mean_tokens, 0.0);
    }
}

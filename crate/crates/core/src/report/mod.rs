//! Batch folder-vs-folder evaluation and the per-file CSV report.

mod stats;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diff::{diff_scores, DiffOptions};
use crate::kern::{parse_lenient, tokenize, TokenFilter};
use crate::metrics::{omr_ned, ser, MetricValue};
use crate::model::{CategoryId, SymbolBag};

pub use stats::{corpus_stats, render_pitch_histogram_csv, render_stats_summary, CorpusStats};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    ParseWarnings(usize),
    MissingPair,
}

/// One reference-vs-prediction comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub file: String,
    pub per_category: SymbolBag,
    pub total_edits: u64,
    pub n_pred: u64,
    pub n_ref: u64,
    pub omr_ned: MetricValue,
    pub ser: Option<MetricValue>,
    pub status: RowStatus,
}

/// A whole batch run: per-file rows in lexicographic file-name order plus
/// the pooled summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub summary_per_category: SymbolBag,
    pub summary_total_edits: u64,
    pub summary_n_pred: u64,
    pub summary_n_ref: u64,
    /// Pooled ratio: sum of (I+D) over the sum of (N1+N2).
    pub overall_omr_ned: MetricValue,
    /// Mean of the per-row ratios, for comparison against the pooled value.
    pub macro_omr_ned: f64,
    pub overall_ser: Option<MetricValue>,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub diff: DiffOptions,
    pub with_ser: bool,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("directory not found: {0}")]
    DirectoryNotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn read_dir_kern_files(dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if !dir.is_dir() {
        return Err(ReportError::DirectoryNotFound(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .map(|e| e.eq_ignore_ascii_case("krn") || e.eq_ignore_ascii_case("ekrn"))
                    .unwrap_or(false)
        })
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));
    Ok(files)
}

/// Compares every reference file in `gt_dir` against the same-named file in
/// `pred_dir`. Missing predictions count as empty scores (the whole
/// reference is inserted). Output is deterministic regardless of the worker
/// count.
pub fn batch_compare(
    gt_dir: &Path,
    pred_dir: &Path,
    opts: &BatchOptions,
) -> Result<RunReport, ReportError> {
    let refs = read_dir_kern_files(gt_dir)?;
    if !pred_dir.is_dir() {
        return Err(ReportError::DirectoryNotFound(pred_dir.to_path_buf()));
    }

    let jobs = opts
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");

    let rows: Vec<ReportRow> = pool.install(|| {
        refs.par_iter()
            .map(|ref_path| compare_one(ref_path, pred_dir, opts))
            .collect()
    });

    Ok(assemble(rows, opts))
}

fn compare_one(ref_path: &Path, pred_dir: &Path, opts: &BatchOptions) -> ReportRow {
    let file = ref_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ref_text = fs::read_to_string(ref_path).unwrap_or_default();
    let (ref_score, ref_warnings) = parse_lenient(&ref_text);

    let pred_path = pred_dir.join(&file);
    let (pred_text, missing) = match fs::read_to_string(&pred_path) {
        Ok(text) => (text, false),
        Err(_) => (String::new(), true),
    };
    let (pred_score, pred_warnings) = parse_lenient(&pred_text);

    let diff = diff_scores(&pred_score, &ref_score, &opts.diff);
    let ned = omr_ned(&diff);
    let row_ser = if opts.with_ser {
        let filter = TokenFilter::full();
        let ref_tokens = tokenize(&ref_text, &filter);
        let pred_tokens = tokenize(&pred_text, &filter);
        ser(&ref_tokens, &pred_tokens).ok()
    } else {
        None
    };
    let status = if missing {
        RowStatus::MissingPair
    } else if !pred_warnings.is_empty() || !ref_warnings.is_empty() {
        RowStatus::ParseWarnings(pred_warnings.len() + ref_warnings.len())
    } else {
        RowStatus::Ok
    };
    ReportRow {
        file,
        per_category: diff.per_category,
        total_edits: diff.total_edits(),
        n_pred: diff.n_pred,
        n_ref: diff.n_ref,
        omr_ned: ned,
        ser: row_ser,
        status,
    }
}

fn assemble(rows: Vec<ReportRow>, opts: &BatchOptions) -> RunReport {
    let mut summary_per_category = SymbolBag::new();
    let mut total_edits = 0u64;
    let mut n_pred = 0u64;
    let mut n_ref = 0u64;
    let mut ser_num = 0u64;
    let mut ser_den = 0u64;
    let mut ratio_sum = 0.0f64;
    for row in &rows {
        summary_per_category.merge(&row.per_category);
        total_edits += row.total_edits;
        n_pred += row.n_pred;
        n_ref += row.n_ref;
        ratio_sum += row.omr_ned.value();
        if let Some(s) = &row.ser {
            ser_num += s.numerator;
            ser_den += s.denominator;
        }
    }
    let macro_omr_ned = if rows.is_empty() {
        0.0
    } else {
        ratio_sum / rows.len() as f64
    };
    RunReport {
        overall_omr_ned: MetricValue::new(total_edits, n_pred + n_ref),
        overall_ser: if opts.with_ser && ser_den > 0 {
            Some(MetricValue::new(ser_num, ser_den))
        } else {
            None
        },
        macro_omr_ned,
        summary_per_category,
        summary_total_edits: total_edits,
        summary_n_pred: n_pred,
        summary_n_ref: n_ref,
        rows,
    }
}

/// Compares two single score texts (the `compare` workflow).
pub fn compare_texts(ref_text: &str, pred_text: &str, opts: &DiffOptions) -> crate::diff::DiffResult {
    let (ref_score, _) = parse_lenient(ref_text);
    let (pred_score, _) = parse_lenient(pred_text);
    diff_scores(&pred_score, &ref_score, opts)
}

const CSV_CATEGORIES: [CategoryId; crate::model::CATEGORY_COUNT] = CategoryId::ALL;

/// Renders the report as CSV, byte-stable: fixed header, one row per file,
/// and a final TOTAL summary row. Ratios carry four decimals.
pub fn render_csv(report: &RunReport, with_ser: bool) -> String {
    let mut out = String::new();
    out.push_str("file");
    for cat in CSV_CATEGORIES {
        out.push(',');
        out.push_str(cat.name());
    }
    out.push_str(",total_edits,pred_symbols,ref_symbols,omr_ned");
    if with_ser {
        out.push_str(",ser");
    }
    out.push('\n');
    for row in &report.rows {
        push_row(
            &mut out,
            &row.file,
            &row.per_category,
            row.total_edits,
            row.n_pred,
            row.n_ref,
            row.omr_ned,
            if with_ser { row.ser } else { None },
            with_ser,
        );
    }
    push_row(
        &mut out,
        "TOTAL",
        &report.summary_per_category,
        report.summary_total_edits,
        report.summary_n_pred,
        report.summary_n_ref,
        report.overall_omr_ned,
        if with_ser { report.overall_ser } else { None },
        with_ser,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn push_row(
    out: &mut String,
    file: &str,
    bag: &SymbolBag,
    total: u64,
    n_pred: u64,
    n_ref: u64,
    ned: MetricValue,
    row_ser: Option<MetricValue>,
    with_ser: bool,
) {
    out.push_str(file);
    for cat in CSV_CATEGORIES {
        out.push_str(&format!(",{}", bag.get(cat)));
    }
    out.push_str(&format!(",{total},{n_pred},{n_ref},{:.4}", ned.value()));
    if with_ser {
        match row_ser {
            Some(s) => out.push_str(&format!(",{:.4}", s.value())),
            None => out.push(','),
        }
    }
    out.push('\n');
}

/// Writes the CSV report to a file (UTF-8, LF line endings).
pub fn write_csv(report: &RunReport, out_path: &Path, with_ser: bool) -> Result<(), ReportError> {
    let text = render_csv(report, with_ser);
    let mut f = fs::File::create(out_path).map_err(|source| ReportError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| ReportError::Io {
        path: out_path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_renders_header_and_total() {
        let report = assemble(Vec::new(), &BatchOptions::default());
        let csv = render_csv(&report, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("file,pitch,accidental,tie,notehead,flagsbeams,dots"));
        assert!(lines[1].starts_with("TOTAL,"));
        assert!(lines[1].ends_with(",0.0000"));
    }

    #[test]
    fn header_matches_contract() {
        let report = assemble(Vec::new(), &BatchOptions::default());
        let csv = render_csv(&report, false);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "file,pitch,accidental,tie,notehead,flagsbeams,dots,articulations,ornaments,grace,\
             dynamic,clef,keysig,timesig,slur,ottava,direction,arpeggio,chordsymbol,lyric,ending,\
             measure,part,staffgroup,total_edits,pred_symbols,ref_symbols,omr_ned"
        );
    }
}

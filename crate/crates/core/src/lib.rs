//! Score comparison toolkit for symbolic music transcription evaluation.
//!
//! The crate parses Humdrum **kern text (strictly or with error recovery)
//! into a file-format-agnostic visual-notation model, computes categorized
//! insert/delete edit distances between predicted and reference scores, and
//! derives the normalized edit-distance metric, SER, and batch CSV reports
//! from them. It also converts between kern and the tokenized ekern form and
//! gathers corpus token statistics.

pub mod diff;
pub mod kern;
pub mod metrics;
pub mod model;
pub mod report;

pub use diff::{diff_scores, DiffOptions, DiffResult, Edit, EditKind, EditList};
pub use kern::{
    from_ekern, parse_lenient, parse_strict, standardize, to_ekern, tokenize, write_kern,
    EkernSyntaxError, KernDocument, SyntaxError, TokenFilter,
};
pub use metrics::{category_percentages, omr_ned, ser, MetricValue, MetricsError};
pub use model::{
    report_group, CategoryId, CountSymbols, Measure, NoteEvent, NonNoteKind, NonNoteObject,
    Offset, Part, Pitch, ReportGroup, RestEvent, Score, StaffGroup, SymbolBag, Warning,
};
pub use report::{
    batch_compare, corpus_stats, write_csv, BatchOptions, CorpusStats, ReportError, ReportRow,
    RowStatus, RunReport,
};

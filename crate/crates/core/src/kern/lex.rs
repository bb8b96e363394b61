//! Record-level lexing of kern text: line splitting, record classification,
//! spine topology tracking, and the cell-count recovery rules of the lenient
//! parser.

use crate::model::WarningKind;

use super::error::{Reporter, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpineKind {
    Kern,
    Dynam,
    Text,
    /// Lenient-only: a spine of an unsupported exclusive interpretation.
    Other,
}

impl SpineKind {
    pub fn exclusive_label(&self) -> &'static str {
        match self {
            SpineKind::Kern => "**kern",
            SpineKind::Dynam => "**dynam",
            SpineKind::Text => "**text",
            SpineKind::Other => "**unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Interpretation,
    Data,
    Barline,
    LocalComment,
}

/// One cell aligned to the topology in force at its record.
#[derive(Debug, Clone)]
pub struct LexCell {
    /// Stable identity of the sub-spine this cell belongs to.
    pub track: usize,
    /// Index of the originating exclusive spine.
    pub spine: usize,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

/// Topology change taking effect after a record, reported so the builder
/// can move per-voice state (clocks, open slurs) across splits and merges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopoEvent {
    Split { parent: usize, child: usize },
    Merge { survivor: usize, absorbed: Vec<usize> },
    Close { track: usize },
}

#[derive(Debug, Clone)]
pub struct LexRecord {
    pub line: usize,
    pub kind: RecordKind,
    pub cells: Vec<LexCell>,
    /// Topology changes this record causes, in cell order.
    pub events: Vec<TopoEvent>,
}

#[derive(Debug)]
pub struct LexOutput {
    pub spines: Vec<SpineKind>,
    pub records: Vec<LexRecord>,
}

#[derive(Debug, Clone, Copy)]
struct TrackSlot {
    track: usize,
    spine: usize,
}

pub fn lex(text: &str, reporter: &mut Reporter) -> Result<LexOutput, SyntaxError> {
    let mut spines: Vec<SpineKind> = Vec::new();
    let mut topology: Vec<TrackSlot> = Vec::new();
    let mut next_track = 0usize;
    let mut records = Vec::new();
    let mut header_seen = false;
    let mut terminated = false;

    let lines: Vec<&str> = split_lines(text);

    for (idx, raw_line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.starts_with("!!") {
            continue;
        }
        if line.is_empty() {
            // completely empty trailing line is just the final newline
            if idx + 1 == lines.len() {
                continue;
            }
            reporter.report(line_no, 1, WarningKind::BlankLine, "blank line skipped")?;
            continue;
        }

        let mut cells = split_cells(line, line_no);

        if !header_seen {
            if cells[0].1.starts_with("**") {
                header_seen = true;
                for (col, text, _) in &cells {
                    let kind = match text.as_str() {
                        "**kern" => SpineKind::Kern,
                        "**dynam" => SpineKind::Dynam,
                        "**text" => SpineKind::Text,
                        other if other.starts_with("**") => {
                            reporter.report(
                                line_no,
                                *col,
                                WarningKind::UnknownSpineType,
                                format!("unsupported exclusive interpretation '{other}'"),
                            )?;
                            SpineKind::Other
                        }
                        other => {
                            reporter.report(
                                line_no,
                                *col,
                                WarningKind::MalformedRecord,
                                format!("'{other}' in the header record treated as **kern"),
                            )?;
                            SpineKind::Kern
                        }
                    };
                    spines.push(kind);
                    topology.push(TrackSlot {
                        track: next_track,
                        spine: spines.len() - 1,
                    });
                    next_track += 1;
                }
                continue;
            }
            // No exclusive interpretation up front: assume one kern spine per
            // column of the widest record.
            reporter.report(
                line_no,
                1,
                WarningKind::MissingHeader,
                "no exclusive interpretation; assuming kern spines from the widest record",
            )?;
            let width = lines
                .iter()
                .map(|l| l.strip_suffix('\r').unwrap_or(l))
                .filter(|l| !l.is_empty() && !l.starts_with("!!"))
                .map(|l| l.split('\t').count())
                .max()
                .unwrap_or(0);
            for i in 0..width {
                spines.push(SpineKind::Kern);
                topology.push(TrackSlot {
                    track: next_track,
                    spine: i,
                });
                next_track += 1;
            }
            header_seen = true;
            // fall through and process this line as an ordinary record
        }

        if terminated {
            reporter.report(
                line_no,
                1,
                WarningKind::DataAfterTerminator,
                "record after all spines were terminated; skipped",
            )?;
            continue;
        }

        let kind = match cells[0].1.chars().next() {
            Some('*') if cells[0].1.starts_with("**") => {
                reporter.report(
                    line_no,
                    1,
                    WarningKind::MalformedRecord,
                    "exclusive interpretation not at the start of the document; skipped",
                )?;
                continue;
            }
            Some('*') => RecordKind::Interpretation,
            Some('=') => RecordKind::Barline,
            Some('!') => RecordKind::LocalComment,
            _ => RecordKind::Data,
        };

        // cell-count recovery
        let expected = topology.len();
        if expected == 0 {
            reporter.report(
                line_no,
                1,
                WarningKind::DataAfterTerminator,
                "record with no open spines; skipped",
            )?;
            continue;
        }
        if cells.len() > expected {
            let extra = cells.len() - expected;
            reporter.report(
                cells[expected].2,
                cells[expected].0,
                WarningKind::TruncatedCells,
                format!("{extra} extra cell(s) truncated"),
            )?;
            cells.truncate(expected);
        } else if cells.len() < expected {
            let missing = expected - cells.len();
            reporter.report(
                line_no,
                line.chars().count() + 1,
                WarningKind::PaddedCells,
                format!("{missing} missing cell(s) padded with null tokens"),
            )?;
            let filler = match kind {
                RecordKind::Data => ".",
                RecordKind::Interpretation => "*",
                RecordKind::Barline => "=",
                RecordKind::LocalComment => "!",
            };
            while cells.len() < expected {
                cells.push((line.chars().count() + 1, filler.to_string(), line_no));
            }
        }

        // per-cell kind coercion
        for (col, text) in cells.iter_mut().map(|(c, t, _)| (*c, t)) {
            let ok = match kind {
                RecordKind::Interpretation => text.starts_with('*') && !text.starts_with("**"),
                RecordKind::Barline => text.starts_with('='),
                RecordKind::LocalComment => text.starts_with('!'),
                RecordKind::Data => {
                    !matches!(text.chars().next(), Some('*') | Some('=') | Some('!'))
                }
            };
            if !ok {
                reporter.report(
                    line_no,
                    col,
                    WarningKind::MalformedRecord,
                    format!("cell '{text}' does not fit a {} record", kind_name(kind)),
                )?;
                *text = match kind {
                    RecordKind::Data => ".",
                    RecordKind::Interpretation => "*",
                    RecordKind::Barline => "=",
                    RecordKind::LocalComment => "!",
                }
                .to_string();
            }
        }

        let lex_cells: Vec<LexCell> = cells
            .iter()
            .zip(topology.iter())
            .map(|((col, text, _), slot)| LexCell {
                track: slot.track,
                spine: slot.spine,
                text: text.clone(),
                line: line_no,
                column: *col,
            })
            .collect();
        let mut events = Vec::new();
        if kind == RecordKind::Interpretation {
            topology = apply_spine_paths(
                &cells,
                &topology,
                &mut next_track,
                line_no,
                reporter,
                &mut events,
            )?;
            if topology.is_empty() {
                terminated = true;
            }
        }
        records.push(LexRecord {
            line: line_no,
            kind,
            cells: lex_cells,
            events,
        });
    }

    if header_seen && !terminated && !topology.is_empty() {
        reporter.report(
            lines.len(),
            1,
            WarningKind::MissingTerminator,
            "document does not terminate its spines; auto-closed",
        )?;
    }
    if !header_seen {
        if text.trim().is_empty() {
            reporter.report(
                1,
                1,
                WarningKind::EmptyDocument,
                "empty document (no exclusive interpretation)",
            )?;
        } else {
            reporter.report(
                1,
                1,
                WarningKind::MissingHeader,
                "no exclusive interpretation",
            )?;
        }
    }

    Ok(LexOutput { spines, records })
}

fn kind_name(kind: RecordKind) -> &'static str {
    match kind {
        RecordKind::Interpretation => "interpretation",
        RecordKind::Data => "data",
        RecordKind::Barline => "barline",
        RecordKind::LocalComment => "comment",
    }
}

/// Splits into lines without treating a trailing newline as an extra line.
fn split_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    text.split('\n').collect()
}

/// Splits a line into (1-based char column, cell text, line) triples.
fn split_cells(line: &str, line_no: usize) -> Vec<(usize, String, usize)> {
    let mut out = Vec::new();
    let mut col = 1usize;
    for cell in line.split('\t') {
        out.push((col, cell.to_string(), line_no));
        col += cell.chars().count() + 1;
    }
    out
}

/// Applies `*-`, `*^` and `*v` to the topology; `*+` and `*x` are outside
/// the supported subset.
fn apply_spine_paths(
    cells: &[(usize, String, usize)],
    topology: &[TrackSlot],
    next_track: &mut usize,
    line_no: usize,
    reporter: &mut Reporter,
    events: &mut Vec<TopoEvent>,
) -> Result<Vec<TrackSlot>, SyntaxError> {
    if !cells
        .iter()
        .any(|(_, t, _)| matches!(t.as_str(), "*-" | "*^" | "*v" | "*+" | "*x"))
    {
        return Ok(topology.to_vec());
    }
    let mut new_topology = Vec::new();
    let mut i = 0usize;
    while i < cells.len() {
        let (col, text, _) = &cells[i];
        let slot = topology[i];
        match text.as_str() {
            "*-" => events.push(TopoEvent::Close { track: slot.track }),
            "*^" => {
                new_topology.push(slot);
                new_topology.push(TrackSlot {
                    track: *next_track,
                    spine: slot.spine,
                });
                events.push(TopoEvent::Split {
                    parent: slot.track,
                    child: *next_track,
                });
                *next_track += 1;
            }
            "*v" => {
                let mut run = 1usize;
                while i + run < cells.len() && cells[i + run].1 == "*v" {
                    run += 1;
                }
                if run == 1 {
                    reporter.report(
                        line_no,
                        *col,
                        WarningKind::UnsupportedSpinePath,
                        "single '*v' cannot merge; ignored",
                    )?;
                    new_topology.push(slot);
                } else {
                    // the merged spine keeps the leftmost identity
                    new_topology.push(slot);
                    events.push(TopoEvent::Merge {
                        survivor: slot.track,
                        absorbed: topology[i + 1..i + run].iter().map(|s| s.track).collect(),
                    });
                    i += run;
                    continue;
                }
            }
            "*+" | "*x" => {
                reporter.report(
                    line_no,
                    *col,
                    WarningKind::UnsupportedSpinePath,
                    format!("spine path '{text}' is unsupported; ignored"),
                )?;
                new_topology.push(slot);
            }
            _ => new_topology.push(slot),
        }
        i += 1;
    }
    Ok(new_topology)
}

#[cfg(test)]
mod tests {
    use super::super::error::Mode;
    use super::*;

    fn lenient(text: &str) -> (LexOutput, Vec<crate::model::Warning>) {
        let mut rep = Reporter::new(Mode::Lenient);
        let out = lex(text, &mut rep).expect("lenient lex never fails");
        (out, rep.warnings)
    }

    fn strict(text: &str) -> Result<LexOutput, SyntaxError> {
        let mut rep = Reporter::new(Mode::Strict);
        lex(text, &mut rep)
    }

    #[test]
    fn lexes_single_spine() {
        let out = strict("**kern\n4c\n*-").unwrap();
        assert_eq!(out.spines, vec![SpineKind::Kern]);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].kind, RecordKind::Data);
        assert_eq!(out.records[1].kind, RecordKind::Interpretation);
    }

    #[test]
    fn empty_text_is_a_strict_error() {
        let err = strict("").unwrap_err();
        assert!(err.reason.contains("exclusive"));
    }

    #[test]
    fn missing_header_assumes_widest_record() {
        let (out, warnings) = lenient("4c\t4e\n4d\t4f");
        assert_eq!(out.spines.len(), 2);
        assert!(warnings
            .iter()
            .any(|w| w.kind == WarningKind::MissingHeader));
    }

    #[test]
    fn extra_cells_truncate_with_warning() {
        let (out, warnings) = lenient("**kern\n4c\t4e\n*-");
        assert_eq!(out.records[0].cells.len(), 1);
        assert!(warnings
            .iter()
            .any(|w| w.kind == WarningKind::TruncatedCells));
    }

    #[test]
    fn short_records_pad_with_nulls() {
        let (out, warnings) = lenient("**kern\t**kern\n4c\n*-\t*-");
        assert_eq!(out.records[0].cells.len(), 2);
        assert_eq!(out.records[0].cells[1].text, ".");
        assert!(warnings.iter().any(|w| w.kind == WarningKind::PaddedCells));
    }

    #[test]
    fn strict_rejects_cell_count_mismatch() {
        assert!(strict("**kern\t**kern\n4c\n*-\t*-").is_err());
        assert!(strict("**kern\n4c\t4e\n*-").is_err());
    }

    #[test]
    fn split_and_merge_update_topology() {
        let out = strict("**kern\n*^\n4c\t4e\n*v\t*v\n4d\n*-").unwrap();
        let data: Vec<_> = out
            .records
            .iter()
            .filter(|r| r.kind == RecordKind::Data)
            .collect();
        assert_eq!(data[0].cells.len(), 2);
        assert_eq!(data[1].cells.len(), 1);
        // the merged cell keeps the leftmost track identity
        assert_eq!(data[1].cells[0].track, data[0].cells[0].track);
    }

    #[test]
    fn missing_terminator_warns() {
        let (_, warnings) = lenient("**kern\n4c");
        assert!(warnings
            .iter()
            .any(|w| w.kind == WarningKind::MissingTerminator));
        assert!(strict("**kern\n4c").is_err());
    }

    #[test]
    fn termination_midway_closes_spine() {
        let out = strict("**kern\t**kern\n4c\t4e\n*-\t*\n4d\n*-").unwrap();
        let data: Vec<_> = out
            .records
            .iter()
            .filter(|r| r.kind == RecordKind::Data)
            .collect();
        assert_eq!(data[1].cells.len(), 1);
        assert_eq!(data[1].cells[0].spine, 1);
    }

    #[test]
    fn exchange_is_unsupported() {
        assert!(strict("**kern\t**kern\n*x\t*x\n*-\t*-").is_err());
        let (_, warnings) = lenient("**kern\t**kern\n*x\t*x\n*-\t*-");
        assert!(warnings
            .iter()
            .any(|w| w.kind == WarningKind::UnsupportedSpinePath));
    }
}

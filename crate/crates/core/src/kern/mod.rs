//! Humdrum **kern ingestion and serialization.
//!
//! Two entry points parse text into the model: [`parse_strict`], which
//! rejects anything outside the supported subset with a positioned
//! [`SyntaxError`], and [`parse_lenient`], which never fails and instead
//! records structured [`Warning`]s for every recovery it performs. The
//! recovery rules, in order: (1) a missing header is replaced by one kern
//! spine per column of the widest record, (2) records with too few cells are
//! padded with null tokens and records with too many are truncated, (3)
//! unrecognized characters inside a token are dropped, (4) wholly
//! unrecognizable cells become null tokens, (5) missing terminators are
//! auto-closed, and (6) content without barlines forms a single measure
//! (shared with strict mode, so it carries no warning).

pub(crate) mod build;
pub(crate) mod cell;
mod ekern;
mod error;
pub(crate) mod lex;
mod tokenize;
mod write;

use crate::model::{Score, Warning};

pub use ekern::{from_ekern, to_ekern};
pub use error::{EkernSyntaxError, SyntaxError, WriteError};
pub use lex::SpineKind;
pub use tokenize::{
    detokenize, is_separator, tokenize, EmptyFilter, TokenCategory, TokenFilter,
    RECORD_SEPARATOR, SPINE_SEPARATOR,
};
pub use write::write_kern;

use error::{Mode, Reporter};

/// Parses well-formed kern within the supported subset.
pub fn parse_strict(text: &str) -> Result<Score, SyntaxError> {
    let mut reporter = Reporter::new(Mode::Strict);
    let lexed = lex::lex(text, &mut reporter)?;
    let score = build::build(&lexed, &mut reporter)?;
    debug_assert!(reporter.warnings.is_empty());
    Ok(score)
}

/// Parses arbitrary text, recovering from malformed input. Never fails; the
/// returned warnings are also stored in `Score::source_warnings`.
pub fn parse_lenient(text: &str) -> (Score, Vec<Warning>) {
    let mut reporter = Reporter::new(Mode::Lenient);
    let lexed = lex::lex(text, &mut reporter).expect("lenient lexing is total");
    let mut score = build::build(&lexed, &mut reporter).expect("lenient building is total");
    score.source_warnings = reporter.warnings.clone();
    (score, reporter.warnings)
}

/// Rewrites text in the canonical kern form: fixed subtoken order within
/// cells, explicit headers and terminators, and renumbered barlines.
/// Idempotent; accepts anything `parse_lenient` accepts.
pub fn standardize(text: &str) -> String {
    let (mut score, _) = parse_lenient(text);
    score.source_warnings.clear();
    write_kern(&score).expect("parser output always serializes")
}

/// Provenance of a [`KernDocument`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    Standardized,
}

/// Record-and-cell view of a kern document, aligned to the spine topology
/// in force at each record.
#[derive(Debug, Clone)]
pub struct KernDocument {
    pub spines: Vec<SpineKind>,
    pub records: Vec<KernRecord>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct KernRecord {
    pub line: usize,
    pub kind: lex::RecordKind,
    pub cells: Vec<String>,
}

impl KernDocument {
    /// Lenient document view of raw text.
    pub fn from_text(text: &str) -> (KernDocument, Vec<Warning>) {
        let mut reporter = Reporter::new(Mode::Lenient);
        let lexed = lex::lex(text, &mut reporter).expect("lenient lexing is total");
        (
            KernDocument::from_lexed(&lexed, Provenance::Raw),
            reporter.warnings,
        )
    }

    /// Strict document view; fails on anything outside the subset grammar.
    pub fn from_text_strict(text: &str) -> Result<KernDocument, SyntaxError> {
        let mut reporter = Reporter::new(Mode::Strict);
        let lexed = lex::lex(text, &mut reporter)?;
        Ok(KernDocument::from_lexed(&lexed, Provenance::Raw))
    }

    /// Document view of the standardized form of the text.
    pub fn standardized(text: &str) -> KernDocument {
        let std_text = standardize(text);
        if std_text.is_empty() {
            return KernDocument {
                spines: Vec::new(),
                records: Vec::new(),
                provenance: Provenance::Standardized,
            };
        }
        let mut doc =
            KernDocument::from_text_strict(&std_text).expect("standardized text is strict-valid");
        doc.provenance = Provenance::Standardized;
        doc
    }

    fn from_lexed(lexed: &lex::LexOutput, provenance: Provenance) -> KernDocument {
        KernDocument {
            spines: lexed.spines.clone(),
            records: lexed
                .records
                .iter()
                .map(|r| KernRecord {
                    line: r.line,
                    kind: r.kind,
                    cells: r.cells.iter().map(|c| c.text.clone()).collect(),
                })
                .collect(),
            provenance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Accidental, CategoryId, CountSymbols, HeadType, NonNoteKind, Offset, Pitch, Step,
        TimeSignature, WarningKind,
    };

    #[test]
    fn strict_example_two_notes() {
        let score = parse_strict("**kern\n*M2/4\n=1\n4c\n4d\n==\n*-").unwrap();
        assert_eq!(score.parts.len(), 1);
        assert_eq!(score.parts[0].measures.len(), 1);
        let m = &score.parts[0].measures[0];
        assert_eq!(m.notes.len(), 2);
        assert_eq!(m.notes[0].pitch, Pitch::new(Step::C, 4));
        assert_eq!(m.notes[0].offset, Offset::new(0, 1));
        assert_eq!(m.notes[0].head, HeadType::Quarter);
        assert_eq!(m.notes[1].pitch, Pitch::new(Step::D, 4));
        assert_eq!(m.notes[1].offset, Offset::new(1, 1));
        let ts: Vec<_> = m
            .non_notes
            .iter()
            .filter_map(|o| match &o.kind {
                NonNoteKind::TimeSignature(t) => Some(*t),
                _ => None,
            })
            .collect();
        assert_eq!(ts, vec![TimeSignature::numeric(2, 4)]);
    }

    #[test]
    fn empty_text_is_a_syntax_error() {
        assert!(parse_strict("").is_err());
    }

    #[test]
    fn eighth_with_sharp() {
        let score = parse_strict("**kern\n8a#\n*-").unwrap();
        let m = &score.parts[0].measures[0];
        assert_eq!(m.notes.len(), 1);
        let n = &m.notes[0];
        assert_eq!(n.pitch, Pitch::new(Step::A, 4));
        assert_eq!(n.accidental, Some(Accidental::Sharp));
        assert_eq!(n.head, HeadType::Quarter);
        assert_eq!(n.flags_beams.len(), 1);
    }

    #[test]
    fn lenient_matches_strict_on_valid_input() {
        let text = "**kern\t**kern\n*M3/4\t*M3/4\n=1\n4c\t8eL\n.\t8fJ\n4d\t4g\n4e\t4a\n==\t==\n*-\t*-";
        // normalize the barline record width
        let text = text.replace("\n=1\n", "\n=1\t=1\n");
        let strict = parse_strict(&text).unwrap();
        let (lenient, warnings) = parse_lenient(&text);
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(strict, lenient);
    }

    #[test]
    fn truncation_recovery() {
        let (score, warnings) = parse_lenient("**kern\n4c\t4e\n*-");
        assert_eq!(score.parts.len(), 1);
        assert_eq!(score.parts[0].measures[0].notes.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].kind, WarningKind::TruncatedCells);
    }

    #[test]
    fn garbage_without_header() {
        let (score, warnings) = parse_lenient("4q!!z");
        assert!(!warnings.is_empty());
        assert_eq!(score.parts.len(), 1);
        // no pitch letter survives, so the cell became a null token
        assert!(score.parts[0].measures.is_empty());
    }

    #[test]
    fn chords_expand_to_note_events() {
        let score = parse_strict("**kern\n*M4/4\n=1\n2c 2e 2g\n2d\n==\n*-").unwrap();
        let m = &score.parts[0].measures[0];
        assert_eq!(m.notes.len(), 4);
        assert_eq!(m.notes[0].offset, Offset::ZERO);
        assert_eq!(m.notes[1].offset, Offset::ZERO);
        assert_eq!(m.notes[2].offset, Offset::ZERO);
        assert_eq!(m.notes[3].offset, Offset::from_int(2));
    }

    #[test]
    fn grace_notes_take_no_time() {
        let score = parse_strict("**kern\n*M2/4\n=1\ncq\n4c\n4d\n==\n*-").unwrap();
        let m = &score.parts[0].measures[0];
        assert_eq!(m.notes.len(), 3);
        assert_eq!(m.notes[0].offset, Offset::ZERO);
        assert_eq!(m.notes[0].grace, crate::model::Grace::Slashed);
        assert_eq!(m.notes[1].offset, Offset::ZERO);
        assert_eq!(m.notes[2].offset, Offset::from_int(1));
    }

    #[test]
    fn strict_rejects_measure_overflow() {
        let err = parse_strict("**kern\n*M2/4\n=1\n4c\n4d\n4e\n==\n*-").unwrap_err();
        assert!(err.reason.contains("overflow"));
    }

    #[test]
    fn spine_split_voices() {
        let text = "**kern\n*^\n2c\t4e\n.\t4f\n*v\t*v\n4d\n*-";
        let score = parse_strict(text).unwrap();
        let m = &score.parts[0].measures[0];
        assert_eq!(m.notes.len(), 4);
        let f = m
            .notes
            .iter()
            .find(|n| n.pitch == Pitch::new(Step::F, 4))
            .unwrap();
        assert_eq!(f.offset, Offset::from_int(1));
        assert_eq!(f.voice, 1);
        let d = m
            .notes
            .iter()
            .find(|n| n.pitch == Pitch::new(Step::D, 4))
            .unwrap();
        assert_eq!(d.offset, Offset::from_int(2));
        assert_eq!(d.voice, 0);
    }

    #[test]
    fn dynamics_and_lyrics_attach_to_the_part() {
        let text = "**kern\t**dynam\t**text\n*M4/4\t*\t*\n=1\t=\t=\n4c\tpp\thel-\n4d\t<\t-lo\n2e\t[\t.\n==\t==\t==\n*-\t*-\t*-";
        let score = parse_strict(text).unwrap();
        assert_eq!(score.parts.len(), 1);
        let m = &score.parts[0].measures[0];
        let dyn_marks: Vec<_> = m
            .non_notes
            .iter()
            .filter(|o| o.kind.category() == CategoryId::Dynamic)
            .collect();
        assert_eq!(dyn_marks.len(), 2);
        let lyrics: Vec<_> = m
            .non_notes
            .iter()
            .filter(|o| o.kind.category() == CategoryId::Lyric)
            .collect();
        assert_eq!(lyrics.len(), 2);
        // hairpin from beat 2 to beat 3
        let hairpin = m
            .non_notes
            .iter()
            .find_map(|o| match &o.kind {
                NonNoteKind::Dynamic(crate::model::DynamicKind::Hairpin {
                    direction,
                    duration,
                }) => Some((*direction, *duration)),
                _ => None,
            })
            .unwrap();
        assert_eq!(hairpin.1, Offset::from_int(1));
    }

    #[test]
    fn slur_spans_are_measured() {
        let score = parse_strict("**kern\n*M4/4\n=1\n(4c\n4d\n4e)\n4f\n==\n*-").unwrap();
        let m = &score.parts[0].measures[0];
        let slur = m
            .non_notes
            .iter()
            .find_map(|o| match &o.kind {
                NonNoteKind::Slur { duration } => Some((o.offset, *duration)),
                _ => None,
            })
            .unwrap();
        assert_eq!(slur.0, Offset::ZERO);
        assert_eq!(slur.1, Offset::from_int(2));
    }

    #[test]
    fn standardize_fixes_subtoken_order() {
        for variant in ["8A#", "A#8", "8#A"] {
            let text = format!("**kern\n{variant}\n*-");
            let std_text = standardize(&text);
            assert!(std_text.contains("8A#"), "{std_text}");
            assert!(std_text.starts_with("**kern"));
            assert!(std_text.trim_end().ends_with("*-"));
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let texts = [
            "**kern\n*M2/4\n=1\n4c\n4d\n==\n*-",
            "8A#",
            "**kern\t**text\n4c\thi\n*-\t*-",
            "",
        ];
        for text in texts {
            let once = standardize(text);
            let twice = standardize(&once);
            assert_eq!(once, twice, "standardize not idempotent for {text:?}");
        }
    }

    #[test]
    fn ekern_round_trip_equals_standardize() {
        let text = "**kern\n*M2/4\n=1\n8cL\n8dJ\n4e\n==\n*-";
        let ek = to_ekern(text);
        assert!(ek.contains("8@c"));
        let back = from_ekern(&ek).unwrap();
        assert_eq!(back, standardize(text));
    }

    #[test]
    fn count_preserved_by_standardize() {
        let text = "**kern\n*M2/4\n=1\n8a#\n8b-\n4c\n==\n*-";
        let (before, _) = parse_lenient(text);
        let (after, _) = parse_lenient(&standardize(text));
        assert_eq!(
            before.count_symbols().total(),
            after.count_symbols().total()
        );
    }
}

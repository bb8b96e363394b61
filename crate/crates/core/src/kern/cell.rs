//! Grammar for individual kern data cells (note, rest, chord and null
//! tokens) and for **dynam cells.
//!
//! A cell is parsed into a structured form first; turning that form into
//! model events (offsets, beam grouping, slur matching) happens in the
//! builder, which has the surrounding context.

use crate::model::{Accidental, Articulation, Grace, HeadType, Offset, Ornament, Pitch, Step};

/// Maximum accepted reciprocal duration value. Larger values are outside the
/// supported subset.
pub const MAX_RECIP: u32 = 2048;
pub const MAX_DOTS: u8 = 8;

/// One note or rest subtoken, before offset/beam resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedNote {
    pub recip: Option<u32>,
    pub dots: u8,
    pub rest: bool,
    pub pitch: Option<Pitch>,
    pub accidental: Option<Accidental>,
    pub tie_begin: bool,
    pub tie_end: bool,
    pub tie_continue: bool,
    pub slur_opens: u8,
    pub slur_closes: u8,
    pub beam_opens: u8,
    pub beam_closes: u8,
    pub articulations: Vec<Articulation>,
    pub ornaments: Vec<Ornament>,
    /// Number of `q` marks: 1 = slashed acciaccatura, 2 = plain appoggiatura.
    pub grace_marks: u8,
}

impl ParsedNote {
    pub fn grace(&self) -> Grace {
        match self.grace_marks {
            0 => Grace::None,
            1 => Grace::Slashed,
            _ => Grace::Plain,
        }
    }

    /// Sounding duration in quarters: 4/recip scaled by the dot factor.
    /// Grace notes (no recip) take zero time.
    pub fn duration(&self) -> Offset {
        let Some(recip) = self.recip else {
            return Offset::ZERO;
        };
        recip_duration(recip, self.dots)
    }

    pub fn head(&self) -> HeadType {
        match self.recip {
            Some(r) => head_for_recip(r),
            None => HeadType::Quarter,
        }
    }

    /// Number of flags or beams implied by the reciprocal duration.
    pub fn tail_count(&self) -> u8 {
        match self.recip {
            Some(r) => tails_for_recip(r),
            None => 0,
        }
    }
}

/// Notated value behind a reciprocal: the largest power of two not
/// exceeding it (a triplet eighth, recip 12, is drawn as an eighth).
fn notated_power(recip: u32) -> u32 {
    debug_assert!(recip >= 1);
    let mut p = 1u32;
    while p * 2 <= recip {
        p *= 2;
    }
    p
}

pub fn head_for_recip(recip: u32) -> HeadType {
    match notated_power(recip) {
        1 => HeadType::Whole,
        2 => HeadType::Half,
        _ => HeadType::Quarter,
    }
}

pub fn tails_for_recip(recip: u32) -> u8 {
    let p = notated_power(recip);
    if p >= 8 {
        (p.trailing_zeros() - 2) as u8
    } else {
        0
    }
}

pub fn recip_duration(recip: u32, dots: u8) -> Offset {
    // base 4/recip quarters, dots multiply by (2^(d+1) - 1) / 2^d
    let factor_num = (1i64 << (dots as u32 + 1)) - 1;
    let factor_den = 1i64 << dots as u32;
    Offset::new(4 * factor_num, recip as i64 * factor_den)
}

/// Outcome of parsing one kern data cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataCell {
    Null,
    /// One or more notes; more than one is a chord.
    Notes(Vec<ParsedNote>),
    Rest(ParsedNote),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellIssue {
    /// Character position within the cell, 0-based.
    pub at: usize,
    pub message: String,
}

fn issue(at: usize, message: impl Into<String>) -> CellIssue {
    CellIssue {
        at,
        message: message.into(),
    }
}

/// Parses one kern data cell. Returns the recognized content plus the list
/// of grammar violations found. Strict mode turns any issue into an error;
/// lenient mode keeps the recovered content and reports the issues as
/// warnings.
pub fn parse_data_cell(cell: &str) -> (DataCell, Vec<CellIssue>) {
    if cell == "." {
        return (DataCell::Null, Vec::new());
    }
    let mut issues = Vec::new();
    let mut notes = Vec::new();
    let mut rest = None;
    let mut base = 0usize;
    for sub in cell.split(' ') {
        let len = sub.chars().count();
        if sub.is_empty() {
            issues.push(issue(base, "empty chord subtoken"));
            base += 1;
            continue;
        }
        let (parsed, mut sub_issues) = parse_subtoken(sub, base);
        issues.append(&mut sub_issues);
        if let Some(p) = parsed {
            if p.rest {
                if rest.is_some() || !notes.is_empty() {
                    issues.push(issue(base, "rest mixed into a chord"));
                } else {
                    rest = Some(p);
                }
            } else if rest.is_some() {
                issues.push(issue(base, "note mixed with a rest in one cell"));
            } else {
                notes.push(p);
            }
        }
        base += len + 1;
    }
    if let Some(r) = rest {
        (DataCell::Rest(r), issues)
    } else if notes.is_empty() {
        if issues.is_empty() {
            issues.push(issue(0, "empty data cell"));
        }
        (DataCell::Null, issues)
    } else {
        (DataCell::Notes(notes), issues)
    }
}

fn parse_subtoken(sub: &str, base: usize) -> (Option<ParsedNote>, Vec<CellIssue>) {
    let mut n = ParsedNote::default();
    let mut issues = Vec::new();
    let chars: Vec<char> = sub.chars().collect();
    let mut i = 0usize;
    let mut digits = String::new();
    let mut letter: Option<char> = None;
    let mut letter_count = 0u32;
    let mut sharps = 0u8;
    let mut flats = 0u8;
    let mut naturals = 0u8;
    let mut dropped = String::new();

    while i < chars.len() {
        let c = chars[i];
        let at = base + i;
        match c {
            '0'..='9' => {
                // only the first digit run is the duration
                let mut run = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    run.push(chars[i]);
                    i += 1;
                }
                if digits.is_empty() {
                    digits = run;
                } else {
                    issues.push(issue(at, format!("extra digit run '{run}' dropped")));
                }
                continue;
            }
            '.' => n.dots = n.dots.saturating_add(1),
            'a'..='g' | 'A'..='G' => match letter {
                None => {
                    letter = Some(c);
                    letter_count = 1;
                }
                Some(prev) if prev == c => letter_count += 1,
                Some(prev) => {
                    issues.push(issue(
                        at,
                        format!("mixed pitch letters '{prev}' and '{c}'; kept '{prev}'"),
                    ));
                }
            },
            'r' => {
                if n.rest {
                    issues.push(issue(at, "duplicate rest marker"));
                }
                n.rest = true;
            }
            '#' => sharps += 1,
            '-' => flats += 1,
            'n' => naturals += 1,
            '[' => n.tie_begin = true,
            ']' => n.tie_end = true,
            '_' => n.tie_continue = true,
            '(' => n.slur_opens += 1,
            ')' => n.slur_closes += 1,
            'L' => n.beam_opens += 1,
            'J' => n.beam_closes += 1,
            '^' => {
                if i + 1 < chars.len() && chars[i + 1] == '^' {
                    n.articulations.push(Articulation::Marcato);
                    i += 1;
                } else {
                    n.articulations.push(Articulation::Accent);
                }
            }
            '\'' => n.articulations.push(Articulation::Staccato),
            '`' => n.articulations.push(Articulation::Staccatissimo),
            '~' => n.articulations.push(Articulation::Tenuto),
            't' | 'T' => n.ornaments.push(Ornament::Trill),
            'm' | 'M' => n.ornaments.push(Ornament::Mordent),
            'S' => n.ornaments.push(Ornament::Turn),
            'q' => n.grace_marks += 1,
            other => dropped.push(other),
        }
        i += 1;
    }

    if !dropped.is_empty() {
        issues.push(issue(base, format!("unrecognized characters '{dropped}' dropped")));
    }

    if !digits.is_empty() {
        match digits.parse::<u32>() {
            Ok(0) => issues.push(issue(base, "breve/longa duration '0' is unsupported")),
            Ok(r) if r > MAX_RECIP => {
                issues.push(issue(base, format!("duration {r} out of supported range")))
            }
            Ok(r) => n.recip = Some(r),
            Err(_) => issues.push(issue(base, "breve/longa duration '00' is unsupported")),
        }
        if n.recip.is_none() {
            // lenient fallback for breve/longa and oversized values
            n.recip = Some(1);
        }
    }
    if n.dots > MAX_DOTS {
        issues.push(issue(base, format!("{} dots exceed the supported maximum", n.dots)));
        n.dots = MAX_DOTS;
    }

    // accidental resolution: exactly one kind may appear
    let kinds = (sharps > 0) as u8 + (flats > 0) as u8 + (naturals > 0) as u8;
    if kinds > 1 {
        issues.push(issue(base, "conflicting accidental marks; kept the first kind"));
    }
    n.accidental = if sharps >= 2 {
        if sharps > 2 {
            issues.push(issue(base, "more than two sharps clamped to double sharp"));
        }
        Some(Accidental::DoubleSharp)
    } else if sharps == 1 {
        Some(Accidental::Sharp)
    } else if flats >= 2 {
        if flats > 2 {
            issues.push(issue(base, "more than two flats clamped to double flat"));
        }
        Some(Accidental::DoubleFlat)
    } else if flats == 1 {
        Some(Accidental::Flat)
    } else if naturals > 0 {
        Some(Accidental::Natural)
    } else {
        None
    };

    if n.grace_marks > 2 {
        issues.push(issue(base, "more than two grace marks clamped"));
        n.grace_marks = 2;
    }

    if let Some(l) = letter {
        if n.rest {
            issues.push(issue(base, "pitch letters on a rest dropped"));
        } else {
            let octave = if l.is_ascii_lowercase() {
                4 + (letter_count as i32 - 1)
            } else {
                4 - letter_count as i32
            };
            n.pitch = Some(Pitch::new(Step::from_letter(l).expect("pitch letter"), octave));
        }
    }

    if n.rest {
        // rests carry only duration, dots and slur marks
        if n.accidental.is_some() {
            issues.push(issue(base, "accidental on a rest dropped"));
            n.accidental = None;
        }
        if n.tie_begin || n.tie_end || n.tie_continue {
            issues.push(issue(base, "tie marks on a rest dropped"));
            n.tie_begin = false;
            n.tie_end = false;
            n.tie_continue = false;
        }
        if n.beam_opens > 0 || n.beam_closes > 0 {
            issues.push(issue(base, "beam marks on a rest dropped"));
            n.beam_opens = 0;
            n.beam_closes = 0;
        }
        if !n.articulations.is_empty() || !n.ornaments.is_empty() || n.grace_marks > 0 {
            issues.push(issue(base, "note marks on a rest dropped"));
            n.articulations.clear();
            n.ornaments.clear();
            n.grace_marks = 0;
        }
        if n.recip.is_none() {
            issues.push(issue(base, "rest without a duration; assumed quarter"));
            n.recip = Some(4);
        }
        return (Some(n), issues);
    }

    if n.pitch.is_none() {
        // a note token must keep at least a pitch letter to survive
        issues.push(issue(base, "token without a pitch letter became a null token"));
        return (None, issues);
    }
    if n.recip.is_none() && n.grace_marks == 0 {
        issues.push(issue(base, "note without a duration; assumed quarter"));
        n.recip = Some(4);
    }

    (Some(n), issues)
}

/// Parsed **dynam cell content.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DynamCell {
    pub cresc_starts: u8,
    pub decresc_starts: u8,
    pub cresc_ends: u8,
    pub decresc_ends: u8,
    pub mark: Option<String>,
}

pub fn parse_dynam_cell(cell: &str) -> (DynamCell, Vec<CellIssue>) {
    let mut out = DynamCell::default();
    let mut issues = Vec::new();
    if cell == "." {
        return (out, issues);
    }
    let mut dropped = String::new();
    let chars: Vec<char> = cell.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        match chars[i] {
            '<' => out.cresc_starts += 1,
            '>' => out.decresc_starts += 1,
            '[' => out.cresc_ends += 1,
            ']' => out.decresc_ends += 1,
            c if c.is_ascii_alphabetic() || c == '.' => {
                let mut run = String::new();
                while i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '.') {
                    run.push(chars[i]);
                    i += 1;
                }
                if out.mark.is_some() {
                    issues.push(issue(i, format!("second dynamic mark '{run}' dropped")));
                } else {
                    out.mark = Some(run);
                }
                continue;
            }
            other => dropped.push(other),
        }
        i += 1;
    }
    if !dropped.is_empty() {
        issues.push(issue(0, format!("unrecognized characters '{dropped}' dropped")));
    }
    (out, issues)
}

/// Renders the canonical text of a note/rest subtoken: duration digits and
/// dots, pitch letters, accidental, grace marks, ties, slurs, beams,
/// articulations in fixed mnemonic order, then ornaments.
pub fn render_subtoken(n: &ParsedNote) -> String {
    let mut s = String::new();
    if let Some(r) = n.recip {
        s.push_str(&r.to_string());
    }
    for _ in 0..n.dots {
        s.push('.');
    }
    if n.rest {
        s.push('r');
    } else if let Some(p) = n.pitch {
        let (ch, count) = kern_pitch_letters(p);
        for _ in 0..count {
            s.push(ch);
        }
    }
    if let Some(acc) = n.accidental {
        s.push_str(match acc {
            Accidental::Sharp => "#",
            Accidental::DoubleSharp => "##",
            Accidental::Flat => "-",
            Accidental::DoubleFlat => "--",
            Accidental::Natural => "n",
        });
    }
    for _ in 0..n.grace_marks {
        s.push('q');
    }
    if n.tie_continue {
        s.push('_');
    } else {
        if n.tie_begin {
            s.push('[');
        }
        if n.tie_end {
            s.push(']');
        }
    }
    for _ in 0..n.slur_opens {
        s.push('(');
    }
    for _ in 0..n.slur_closes {
        s.push(')');
    }
    for _ in 0..n.beam_opens {
        s.push('L');
    }
    for _ in 0..n.beam_closes {
        s.push('J');
    }
    let mut arts = n.articulations.clone();
    arts.sort(); // enum order is the fixed alphabetical mnemonic order
    for a in arts {
        s.push_str(match a {
            Articulation::Accent => "^",
            Articulation::Marcato => "^^",
            Articulation::Staccatissimo => "`",
            Articulation::Staccato => "'",
            Articulation::Tenuto => "~",
        });
    }
    let mut orns = n.ornaments.clone();
    orns.sort();
    for o in orns {
        s.push_str(match o {
            Ornament::Mordent => "m",
            Ornament::Trill => "t",
            Ornament::Turn => "S",
        });
    }
    s
}

/// Kern letter encoding of a spelled pitch: lowercase letters climb from the
/// middle-C octave, uppercase letters descend below it.
pub fn kern_pitch_letters(p: Pitch) -> (char, u32) {
    let letter = p.step.letter();
    if p.octave >= 4 {
        (letter.to_ascii_lowercase(), (p.octave - 4 + 1) as u32)
    } else {
        (letter, (4 - p.octave) as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok_note(cell: &str) -> ParsedNote {
        let (parsed, issues) = parse_data_cell(cell);
        assert!(issues.is_empty(), "unexpected issues for {cell}: {issues:?}");
        match parsed {
            DataCell::Notes(mut ns) => {
                assert_eq!(ns.len(), 1);
                ns.pop().unwrap()
            }
            other => panic!("expected a note for {cell}, got {other:?}"),
        }
    }

    #[test]
    fn parses_minimal_quarter() {
        let n = ok_note("4c");
        assert_eq!(n.recip, Some(4));
        assert_eq!(n.pitch, Some(Pitch::new(Step::C, 4)));
        assert_eq!(n.head(), HeadType::Quarter);
        assert_eq!(n.tail_count(), 0);
        assert_eq!(n.duration(), Offset::from_int(1));
    }

    #[test]
    fn octave_letters() {
        assert_eq!(ok_note("4cc").pitch, Some(Pitch::new(Step::C, 5)));
        assert_eq!(ok_note("4C").pitch, Some(Pitch::new(Step::C, 3)));
        assert_eq!(ok_note("4CC").pitch, Some(Pitch::new(Step::C, 2)));
        assert_eq!(ok_note("4a").pitch, Some(Pitch::new(Step::A, 4)));
    }

    #[test]
    fn subtoken_order_is_irrelevant() {
        for variant in ["8A#", "A#8", "8#A"] {
            let n = ok_note(variant);
            assert_eq!(n.recip, Some(8));
            assert_eq!(n.pitch, Some(Pitch::new(Step::A, 3)));
            assert_eq!(n.accidental, Some(Accidental::Sharp));
            assert_eq!(render_subtoken(&n), "8A#");
        }
    }

    #[test]
    fn eighth_has_one_tail_and_quarter_head() {
        let n = ok_note("8a#");
        assert_eq!(n.head(), HeadType::Quarter);
        assert_eq!(n.tail_count(), 1);
    }

    #[test]
    fn tuplet_recips() {
        assert_eq!(tails_for_recip(12), 1);
        assert_eq!(tails_for_recip(6), 0);
        assert_eq!(head_for_recip(6), HeadType::Quarter);
        assert_eq!(head_for_recip(3), HeadType::Half);
        assert_eq!(recip_duration(12, 0), Offset::new(1, 3));
        assert_eq!(recip_duration(4, 1), Offset::new(3, 2));
        assert_eq!(recip_duration(4, 2), Offset::new(7, 4));
    }

    #[test]
    fn chord_splits_into_notes() {
        let (cell, issues) = parse_data_cell("4c 4e 4g");
        assert!(issues.is_empty());
        match cell {
            DataCell::Notes(ns) => assert_eq!(ns.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rest_cell() {
        let (cell, issues) = parse_data_cell("2.r");
        assert!(issues.is_empty());
        match cell {
            DataCell::Rest(r) => {
                assert_eq!(r.recip, Some(2));
                assert_eq!(r.dots, 1);
                assert_eq!(r.duration(), Offset::from_int(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_recovers_to_null() {
        let (cell, issues) = parse_data_cell("4q!!z");
        assert_eq!(cell, DataCell::Null);
        assert!(!issues.is_empty());
    }

    #[test]
    fn dropped_characters_reported() {
        let (cell, issues) = parse_data_cell("4cyy");
        assert!(matches!(cell, DataCell::Notes(_)));
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("yy"));
    }

    #[test]
    fn breve_is_an_issue() {
        let (_, issues) = parse_data_cell("0c");
        assert!(issues.iter().any(|i| i.message.contains("breve")));
    }

    #[test]
    fn marcato_scans_before_accent() {
        let n = ok_note("4c^^");
        assert_eq!(n.articulations, vec![Articulation::Marcato]);
        let n = ok_note("4c^^^");
        assert_eq!(n.articulations, vec![Articulation::Marcato, Articulation::Accent]);
        // canonical order re-renders the same byte sequence
        assert_eq!(render_subtoken(&n), "4c^^^");
    }

    #[test]
    fn grace_mapping() {
        assert_eq!(ok_note("cq").grace(), Grace::Slashed);
        assert_eq!(ok_note("cqq").grace(), Grace::Plain);
        assert_eq!(ok_note("cq").duration(), Offset::ZERO);
    }

    #[test]
    fn canonical_render_is_sorted() {
        let (cell, _) = parse_data_cell("'8~cL#");
        let DataCell::Notes(ns) = cell else { panic!() };
        assert_eq!(render_subtoken(&ns[0]), "8c#L'~");
    }

    #[test]
    fn dynam_cells() {
        let (d, issues) = parse_dynam_cell("pp");
        assert!(issues.is_empty());
        assert_eq!(d.mark.as_deref(), Some("pp"));
        let (d, _) = parse_dynam_cell("[<");
        assert_eq!(d.cresc_ends, 1);
        assert_eq!(d.cresc_starts, 1);
    }
}

//! File-format-agnostic visual-notation model.
//!
//! Scores are plain immutable values: a `Score` owns ordered `Part`s, each
//! part owns `Measure`s, and measures own note/rest events and non-note
//! objects positioned at exact rational offsets. Every object knows how many
//! visual symbols it contributes per category; those counts are the currency
//! of all edit distances.

mod offset;

use std::collections::BTreeMap;
use std::fmt;

pub use offset::{Offset, OffsetError};

/// Closed set of symbol categories. Every counted symbol belongs to exactly
/// one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(usize)]
pub enum CategoryId {
    Pitch,
    Accidental,
    Tie,
    NoteHead,
    FlagsBeams,
    Dots,
    Articulations,
    Ornaments,
    Grace,
    Dynamic,
    Clef,
    KeySignature,
    TimeSignature,
    Slur,
    Ottava,
    Direction,
    Arpeggio,
    ChordSymbol,
    Lyric,
    Ending,
    Measure,
    Part,
    StaffGroup,
}

pub const CATEGORY_COUNT: usize = 23;

impl CategoryId {
    pub const ALL: [CategoryId; CATEGORY_COUNT] = [
        CategoryId::Pitch,
        CategoryId::Accidental,
        CategoryId::Tie,
        CategoryId::NoteHead,
        CategoryId::FlagsBeams,
        CategoryId::Dots,
        CategoryId::Articulations,
        CategoryId::Ornaments,
        CategoryId::Grace,
        CategoryId::Dynamic,
        CategoryId::Clef,
        CategoryId::KeySignature,
        CategoryId::TimeSignature,
        CategoryId::Slur,
        CategoryId::Ottava,
        CategoryId::Direction,
        CategoryId::Arpeggio,
        CategoryId::ChordSymbol,
        CategoryId::Lyric,
        CategoryId::Ending,
        CategoryId::Measure,
        CategoryId::Part,
        CategoryId::StaffGroup,
    ];

    /// Stable lowercase name, also used for CSV columns and CLI flags.
    pub fn name(&self) -> &'static str {
        match self {
            CategoryId::Pitch => "pitch",
            CategoryId::Accidental => "accidental",
            CategoryId::Tie => "tie",
            CategoryId::NoteHead => "notehead",
            CategoryId::FlagsBeams => "flagsbeams",
            CategoryId::Dots => "dots",
            CategoryId::Articulations => "articulations",
            CategoryId::Ornaments => "ornaments",
            CategoryId::Grace => "grace",
            CategoryId::Dynamic => "dynamic",
            CategoryId::Clef => "clef",
            CategoryId::KeySignature => "keysig",
            CategoryId::TimeSignature => "timesig",
            CategoryId::Slur => "slur",
            CategoryId::Ottava => "ottava",
            CategoryId::Direction => "direction",
            CategoryId::Arpeggio => "arpeggio",
            CategoryId::ChordSymbol => "chordsymbol",
            CategoryId::Lyric => "lyric",
            CategoryId::Ending => "ending",
            CategoryId::Measure => "measure",
            CategoryId::Part => "part",
            CategoryId::StaffGroup => "staffgroup",
        }
    }

    pub fn from_name(name: &str) -> Option<CategoryId> {
        CategoryId::ALL.iter().copied().find(|c| c.name() == name)
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Report-level grouping of categories, used for percentage profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportGroup {
    Note,
    Extra,
    Lyrics,
    Measure,
    Part,
    StaffGroup,
}

impl ReportGroup {
    pub const ALL: [ReportGroup; 6] = [
        ReportGroup::Note,
        ReportGroup::Extra,
        ReportGroup::Lyrics,
        ReportGroup::Measure,
        ReportGroup::Part,
        ReportGroup::StaffGroup,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ReportGroup::Note => "note",
            ReportGroup::Extra => "extra",
            ReportGroup::Lyrics => "lyrics",
            ReportGroup::Measure => "measure",
            ReportGroup::Part => "part",
            ReportGroup::StaffGroup => "staffgroup",
        }
    }
}

impl fmt::Display for ReportGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps each fine-grained category to its report group. Total and surjective.
pub fn report_group(cat: CategoryId) -> ReportGroup {
    use CategoryId::*;
    match cat {
        Pitch | Accidental | Tie | NoteHead | FlagsBeams | Dots | Articulations | Ornaments
        | Grace => ReportGroup::Note,
        Dynamic | Clef | KeySignature | TimeSignature | Slur | Ottava | Direction | Arpeggio
        | ChordSymbol | Ending => ReportGroup::Extra,
        Lyric => ReportGroup::Lyrics,
        Measure => ReportGroup::Measure,
        Part => ReportGroup::Part,
        StaffGroup => ReportGroup::StaffGroup,
    }
}

/// Per-category symbol counts. Addition is commutative and associative with
/// the empty bag as identity.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct SymbolBag {
    counts: [u64; CATEGORY_COUNT],
}

impl SymbolBag {
    pub fn new() -> SymbolBag {
        SymbolBag::default()
    }

    pub fn single(cat: CategoryId, count: u64) -> SymbolBag {
        let mut bag = SymbolBag::new();
        bag.add(cat, count);
        bag
    }

    pub fn add(&mut self, cat: CategoryId, count: u64) {
        self.counts[cat as usize] += count;
    }

    pub fn get(&self, cat: CategoryId) -> u64 {
        self.counts[cat as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    pub fn merge(&mut self, other: &SymbolBag) {
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }

    /// Copy with the given categories zeroed out.
    pub fn without(&self, excluded: &[CategoryId]) -> SymbolBag {
        let mut bag = *self;
        for cat in excluded {
            bag.counts[*cat as usize] = 0;
        }
        bag
    }

    pub fn iter(&self) -> impl Iterator<Item = (CategoryId, u64)> + '_ {
        CategoryId::ALL
            .iter()
            .map(move |&c| (c, self.counts[c as usize]))
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (CategoryId, u64)> + '_ {
        self.iter().filter(|&(_, n)| n > 0)
    }
}

impl std::ops::Add for SymbolBag {
    type Output = SymbolBag;
    fn add(mut self, rhs: SymbolBag) -> SymbolBag {
        self.merge(&rhs);
        self
    }
}

impl fmt::Debug for SymbolBag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let entries: BTreeMap<&str, u64> =
            self.iter_nonzero().map(|(c, n)| (c.name(), n)).collect();
        write!(f, "SymbolBag{entries:?}")
    }
}

/// Spelled pitch step letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Step {
    pub fn letter(&self) -> char {
        match self {
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
            Step::A => 'A',
            Step::B => 'B',
        }
    }

    pub fn from_letter(c: char) -> Option<Step> {
        match c.to_ascii_uppercase() {
            'C' => Some(Step::C),
            'D' => Some(Step::D),
            'E' => Some(Step::E),
            'F' => Some(Step::F),
            'G' => Some(Step::G),
            'A' => Some(Step::A),
            'B' => Some(Step::B),
            _ => None,
        }
    }
}

/// Spelled pitch: step letter plus scientific octave (middle C is C4).
/// Accidentals are tracked separately on the note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pitch {
    pub step: Step,
    pub octave: i32,
}

impl Pitch {
    pub fn new(step: Step, octave: i32) -> Pitch {
        Pitch { step, octave }
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.step.letter(), self.octave)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Accidental {
    DoubleFlat,
    Flat,
    Natural,
    Sharp,
    DoubleSharp,
}

impl Accidental {
    pub fn label(&self) -> &'static str {
        match self {
            Accidental::DoubleFlat => "double flat",
            Accidental::Flat => "flat",
            Accidental::Natural => "natural",
            Accidental::Sharp => "sharp",
            Accidental::DoubleSharp => "double sharp",
        }
    }
}

/// Note head duration class. Eighth notes and shorter still use a quarter
/// head; flags/beams differentiate further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HeadType {
    Whole,
    Half,
    Quarter,
}

impl HeadType {
    pub fn label(&self) -> &'static str {
        match self {
            HeadType::Whole => "whole",
            HeadType::Half => "half",
            HeadType::Quarter => "quarter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlagBeam {
    Flag,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Articulation {
    Accent,
    Marcato,
    Staccatissimo,
    Staccato,
    Tenuto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ornament {
    Mordent,
    Trill,
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grace {
    None,
    Plain,
    Slashed,
}

impl Grace {
    /// Symbol contribution: one for a grace note, one more if slashed.
    pub fn symbol_count(&self) -> u64 {
        match self {
            Grace::None => 0,
            Grace::Plain => 1,
            Grace::Slashed => 2,
        }
    }
}

/// A pitched event within a measure.
///
/// `duration` (sounding length in quarters), `voice` and `tie_from_prev` are
/// serialization bookkeeping: they carry no symbols and do not take part in
/// comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteEvent {
    pub offset: Offset,
    pub pitch: Pitch,
    pub accidental: Option<Accidental>,
    pub tie_to_next: bool,
    pub tie_from_prev: bool,
    pub head: HeadType,
    pub flags_beams: Vec<FlagBeam>,
    pub dots: u8,
    pub articulations: Vec<Articulation>,
    pub ornaments: Vec<Ornament>,
    pub grace: Grace,
    pub duration: Offset,
    pub voice: usize,
}

impl NoteEvent {
    /// Minimal note: pitch plus head, everything else empty.
    pub fn plain(offset: Offset, pitch: Pitch, head: HeadType, duration: Offset) -> NoteEvent {
        NoteEvent {
            offset,
            pitch,
            accidental: None,
            tie_to_next: false,
            tie_from_prev: false,
            head,
            flags_beams: Vec::new(),
            dots: 0,
            articulations: Vec::new(),
            ornaments: Vec::new(),
            grace: Grace::None,
            duration,
            voice: 0,
        }
    }

    pub fn symbols(&self) -> SymbolBag {
        let mut bag = SymbolBag::new();
        bag.add(CategoryId::Pitch, 1);
        if self.accidental.is_some() {
            bag.add(CategoryId::Accidental, 1);
        }
        if self.tie_to_next {
            bag.add(CategoryId::Tie, 1);
        }
        bag.add(CategoryId::NoteHead, 1);
        bag.add(CategoryId::FlagsBeams, self.flags_beams.len() as u64);
        bag.add(CategoryId::Dots, self.dots as u64);
        bag.add(CategoryId::Articulations, self.articulations.len() as u64);
        bag.add(CategoryId::Ornaments, self.ornaments.len() as u64);
        bag.add(CategoryId::Grace, self.grace.symbol_count());
        bag
    }
}

/// An unpitched rest within a measure. Carries only a head and dots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestEvent {
    pub offset: Offset,
    pub head: HeadType,
    pub dots: u8,
    pub duration: Offset,
    pub voice: usize,
}

impl RestEvent {
    pub fn new(offset: Offset, head: HeadType, dots: u8, duration: Offset) -> RestEvent {
        RestEvent {
            offset,
            head,
            dots,
            duration,
            voice: 0,
        }
    }

    pub fn symbols(&self) -> SymbolBag {
        let mut bag = SymbolBag::single(CategoryId::NoteHead, 1);
        bag.add(CategoryId::Dots, self.dots as u64);
        bag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HairpinDirection {
    Crescendo,
    Decrescendo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DynamicKind {
    /// A textual mark such as `p` or `fff`: one symbol regardless of length.
    Mark(String),
    /// A wedge: one symbol for the direction plus one for the duration.
    Hairpin {
        direction: HairpinDirection,
        duration: Offset,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClefShape {
    G,
    F,
    C,
    Percussion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Clef {
    pub shape: ClefShape,
    pub line: u8,
    /// Octave displacement in octaves: -1 for an octave-down clef, etc.
    pub octave_shift: i8,
}

/// Key signature as a signed accidental count: positive sharps, negative
/// flats, zero for an empty signature. Counts one symbol per accidental.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySignature {
    pub accidentals: i8,
}

impl KeySignature {
    pub fn accidental_count(&self) -> u64 {
        self.accidentals.unsigned_abs() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeSymbol {
    None,
    Common,
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeSignature {
    pub top: Option<u32>,
    pub bottom: Option<u32>,
    pub symbol: TimeSymbol,
}

impl TimeSignature {
    pub fn numeric(top: u32, bottom: u32) -> TimeSignature {
        TimeSignature {
            top: Some(top),
            bottom: Some(bottom),
            symbol: TimeSymbol::None,
        }
    }

    pub fn symbolic(symbol: TimeSymbol) -> TimeSignature {
        TimeSignature {
            top: None,
            bottom: None,
            symbol,
        }
    }

    /// Two symbols for numeric forms (top and bottom), one for C / cut-C.
    pub fn symbol_count(&self) -> u64 {
        if self.symbol != TimeSymbol::None {
            1
        } else {
            self.top.is_some() as u64 + self.bottom.is_some() as u64
        }
    }

    /// Notated measure span in quarters, when derivable.
    pub fn span_quarters(&self) -> Option<Offset> {
        match (self.top, self.bottom) {
            (Some(t), Some(b)) if b > 0 => Some(Offset::new(4 * t as i64, b as i64)),
            _ => match self.symbol {
                TimeSymbol::Common | TimeSymbol::Cut => Some(Offset::from_int(4)),
                TimeSymbol::None => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OttavaKind {
    Up8,
    Down8,
    Up15,
    Down15,
}

impl OttavaKind {
    pub fn label(&self) -> &'static str {
        match self {
            OttavaKind::Up8 => "8va",
            OttavaKind::Down8 => "8ba",
            OttavaKind::Up15 => "15ma",
            OttavaKind::Down15 => "15ba",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArpeggioKind {
    Up,
    Down,
    Undirected,
    NonArpeggiate,
}

/// Non-note objects: one category each, positioned at an exact offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NonNoteKind {
    Dynamic(DynamicKind),
    Clef(Clef),
    KeySignature(KeySignature),
    TimeSignature(TimeSignature),
    Slur { duration: Offset },
    Ottava { kind: OttavaKind, duration: Offset },
    Direction { text: String },
    Arpeggio { kind: ArpeggioKind, spans_staves: bool },
    ChordSymbol,
    Lyric { syllable: String, verse: u32 },
    Ending { name: String, measure_count: u32 },
}

impl NonNoteKind {
    pub fn category(&self) -> CategoryId {
        match self {
            NonNoteKind::Dynamic(_) => CategoryId::Dynamic,
            NonNoteKind::Clef(_) => CategoryId::Clef,
            NonNoteKind::KeySignature(_) => CategoryId::KeySignature,
            NonNoteKind::TimeSignature(_) => CategoryId::TimeSignature,
            NonNoteKind::Slur { .. } => CategoryId::Slur,
            NonNoteKind::Ottava { .. } => CategoryId::Ottava,
            NonNoteKind::Direction { .. } => CategoryId::Direction,
            NonNoteKind::Arpeggio { .. } => CategoryId::Arpeggio,
            NonNoteKind::ChordSymbol => CategoryId::ChordSymbol,
            NonNoteKind::Lyric { .. } => CategoryId::Lyric,
            NonNoteKind::Ending { .. } => CategoryId::Ending,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonNoteObject {
    pub offset: Offset,
    pub kind: NonNoteKind,
    /// Serialization bookkeeping: the voice the object was attached to.
    pub voice: usize,
}

impl NonNoteObject {
    pub fn new(offset: Offset, kind: NonNoteKind) -> NonNoteObject {
        NonNoteObject {
            offset,
            kind,
            voice: 0,
        }
    }

    pub fn symbols(&self) -> SymbolBag {
        let cat = self.kind.category();
        let count = match &self.kind {
            NonNoteKind::Dynamic(DynamicKind::Mark(_)) => 1,
            NonNoteKind::Dynamic(DynamicKind::Hairpin { .. }) => 2,
            NonNoteKind::Clef(_) => 1,
            NonNoteKind::KeySignature(k) => k.accidental_count(),
            NonNoteKind::TimeSignature(t) => t.symbol_count(),
            NonNoteKind::Slur { .. } => 1,
            NonNoteKind::Ottava { .. } => 2,
            NonNoteKind::Direction { text } => text.chars().count() as u64,
            NonNoteKind::Arpeggio { spans_staves, .. } => 1 + *spans_staves as u64,
            NonNoteKind::ChordSymbol => 1,
            NonNoteKind::Lyric { syllable, .. } => syllable.chars().count() as u64 + 1,
            NonNoteKind::Ending { name, .. } => name.chars().count() as u64 + 1,
        };
        SymbolBag::single(cat, count)
    }
}

/// One measure: a 0-based index, its contents, and exactly one structural
/// symbol in the Measure category (the barline / the measure itself).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Measure {
    pub index: usize,
    pub notes: Vec<NoteEvent>,
    pub rests: Vec<RestEvent>,
    pub non_notes: Vec<NonNoteObject>,
}

impl Measure {
    pub fn new(index: usize) -> Measure {
        Measure {
            index,
            ..Measure::default()
        }
    }

    /// Puts the measure contents into the canonical order: events by
    /// (offset, voice, pitch), objects by (offset, kind rank, voice). The
    /// parser produces measures in this order regardless of how the source
    /// interleaved its records.
    pub fn normalize(&mut self) {
        self.notes.sort_by(|a, b| {
            (a.offset, a.voice, a.pitch.octave, a.pitch.step, a.accidental)
                .cmp(&(b.offset, b.voice, b.pitch.octave, b.pitch.step, b.accidental))
        });
        self.rests
            .sort_by(|a, b| (a.offset, a.voice, a.dots).cmp(&(b.offset, b.voice, b.dots)));
        self.non_notes.sort_by(|a, b| {
            (a.offset, non_note_rank(&a.kind), a.voice)
                .cmp(&(b.offset, non_note_rank(&b.kind), b.voice))
                .then_with(|| format!("{:?}", a.kind).cmp(&format!("{:?}", b.kind)))
        });
    }

    pub fn symbols(&self) -> SymbolBag {
        let mut bag = SymbolBag::single(CategoryId::Measure, 1);
        for n in &self.notes {
            bag.merge(&n.symbols());
        }
        for r in &self.rests {
            bag.merge(&r.symbols());
        }
        for o in &self.non_notes {
            bag.merge(&o.symbols());
        }
        bag
    }
}

/// One part (staff): ordered measures plus one structural Part symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub id: usize,
    pub measures: Vec<Measure>,
}

impl Part {
    pub fn new(id: usize) -> Part {
        Part {
            id,
            measures: Vec::new(),
        }
    }

    pub fn symbols(&self) -> SymbolBag {
        let mut bag = SymbolBag::single(CategoryId::Part, 1);
        for m in &self.measures {
            bag.merge(&m.symbols());
        }
        bag
    }
}

/// Bracketed group of staves (e.g. a piano grand staff): one structural
/// StaffGroup symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaffGroup {
    pub member_parts: Vec<usize>,
}

impl StaffGroup {
    pub fn symbols(&self) -> SymbolBag {
        SymbolBag::single(CategoryId::StaffGroup, 1)
    }
}

/// Structured parse warning emitted by lenient ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    /// 1-based source line, 0 when not applicable.
    pub line: usize,
    /// 1-based character column, 0 when not applicable.
    pub column: usize,
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WarningKind {
    EmptyDocument,
    MissingHeader,
    PaddedCells,
    TruncatedCells,
    DroppedCharacters,
    UnrecognizedCell,
    MissingTerminator,
    UnknownSpineType,
    UnknownInterpretation,
    UnsupportedSpinePath,
    UnbalancedBeam,
    UnbalancedSlur,
    UnbalancedHairpin,
    UnbalancedOttava,
    ChordDurationMismatch,
    UnsupportedDuration,
    MalformedRecord,
    DataAfterTerminator,
    BlankLine,
    MissingDuration,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

/// A complete score: ordered parts, staff groups, and any warnings that were
/// produced while ingesting the source.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Score {
    pub parts: Vec<Part>,
    pub staff_groups: Vec<StaffGroup>,
    pub source_warnings: Vec<Warning>,
}

impl Score {
    pub fn new() -> Score {
        Score::default()
    }

    pub fn symbols(&self) -> SymbolBag {
        let mut bag = SymbolBag::new();
        for p in &self.parts {
            bag.merge(&p.symbols());
        }
        for g in &self.staff_groups {
            bag.merge(&g.symbols());
        }
        bag
    }

    pub fn total_symbols(&self) -> u64 {
        self.symbols().total()
    }

    /// Checks the unconditional model invariants. Lenient parses must still
    /// satisfy all of these.
    pub fn validate(&self) -> Result<(), ModelError> {
        for part in &self.parts {
            for (i, m) in part.measures.iter().enumerate() {
                if m.index != i {
                    return Err(ModelError::NonConsecutiveMeasures {
                        part: part.id,
                        expected: i,
                        found: m.index,
                    });
                }
                for n in &m.notes {
                    if !n.flags_beams.is_empty() && n.head != HeadType::Quarter {
                        return Err(ModelError::FlaggedNonQuarterHead {
                            part: part.id,
                            measure: i,
                        });
                    }
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.staff_groups {
            for &member in &g.member_parts {
                if member >= self.parts.len() {
                    return Err(ModelError::DanglingGroupMember { member });
                }
                if !seen.insert(member) {
                    return Err(ModelError::OverlappingGroups { member });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("part {part}: measure index {found} where {expected} was expected")]
    NonConsecutiveMeasures {
        part: usize,
        expected: usize,
        found: usize,
    },
    #[error("part {part}, measure {measure}: flagged/beamed note without a quarter head")]
    FlaggedNonQuarterHead { part: usize, measure: usize },
    #[error("staff group references nonexistent part {member}")]
    DanglingGroupMember { member: usize },
    #[error("part {member} belongs to more than one staff group")]
    OverlappingGroups { member: usize },
}

/// Per-category symbol counts for any model object.
pub trait CountSymbols {
    fn count_symbols(&self) -> SymbolBag;
}

macro_rules! impl_count {
    ($($ty:ty),*) => {
        $(impl CountSymbols for $ty {
            fn count_symbols(&self) -> SymbolBag {
                self.symbols()
            }
        })*
    };
}

impl_count!(NoteEvent, RestEvent, NonNoteObject, Measure, Part, StaffGroup, Score);

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_note(pitch: Pitch) -> NoteEvent {
        NoteEvent::plain(Offset::ZERO, pitch, HeadType::Quarter, Offset::from_int(1))
    }

    #[test]
    fn numeric_time_signature_counts_two_symbols() {
        let ts = TimeSignature::numeric(12, 8);
        let obj = NonNoteObject::new(Offset::ZERO, NonNoteKind::TimeSignature(ts));
        assert_eq!(obj.symbols(), SymbolBag::single(CategoryId::TimeSignature, 2));
    }

    #[test]
    fn common_time_counts_one_symbol() {
        let ts = TimeSignature::symbolic(TimeSymbol::Common);
        let obj = NonNoteObject::new(Offset::ZERO, NonNoteKind::TimeSignature(ts));
        assert_eq!(obj.symbols(), SymbolBag::single(CategoryId::TimeSignature, 1));
    }

    #[test]
    fn minimal_note_counts_pitch_and_head() {
        let note = quarter_note(Pitch::new(Step::C, 4));
        let bag = note.symbols();
        assert_eq!(bag.get(CategoryId::Pitch), 1);
        assert_eq!(bag.get(CategoryId::NoteHead), 1);
        assert_eq!(bag.total(), 2);
    }

    #[test]
    fn decorated_eighth_counts_six_symbols() {
        // eighth A4 with sharp, one beam, one dot, staccato
        let mut note = NoteEvent::plain(
            Offset::ZERO,
            Pitch::new(Step::A, 4),
            HeadType::Quarter,
            Offset::new(3, 4),
        );
        note.accidental = Some(Accidental::Sharp);
        note.flags_beams = vec![FlagBeam::Beam];
        note.dots = 1;
        note.articulations = vec![Articulation::Staccato];
        let bag = note.symbols();
        assert_eq!(bag.get(CategoryId::Pitch), 1);
        assert_eq!(bag.get(CategoryId::Accidental), 1);
        assert_eq!(bag.get(CategoryId::NoteHead), 1);
        assert_eq!(bag.get(CategoryId::FlagsBeams), 1);
        assert_eq!(bag.get(CategoryId::Dots), 1);
        assert_eq!(bag.get(CategoryId::Articulations), 1);
        assert_eq!(bag.total(), 6);
    }

    #[test]
    fn key_signature_counts_one_per_accidental() {
        let obj = NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::KeySignature(KeySignature { accidentals: 3 }),
        );
        assert_eq!(obj.symbols(), SymbolBag::single(CategoryId::KeySignature, 3));
        let flat = NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::KeySignature(KeySignature { accidentals: -2 }),
        );
        assert_eq!(flat.symbols().total(), 2);
    }

    #[test]
    fn lyric_counts_characters_plus_verse() {
        let obj = NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::Lyric {
                syllable: "love".to_string(),
                verse: 1,
            },
        );
        assert_eq!(obj.symbols(), SymbolBag::single(CategoryId::Lyric, 5));
    }

    #[test]
    fn hairpin_counts_direction_plus_duration() {
        let obj = NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::Dynamic(DynamicKind::Hairpin {
                direction: HairpinDirection::Crescendo,
                duration: Offset::from_int(2),
            }),
        );
        assert_eq!(obj.symbols().total(), 2);
        let mark = NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::Dynamic(DynamicKind::Mark("fff".to_string())),
        );
        assert_eq!(mark.symbols().total(), 1);
    }

    #[test]
    fn grace_counts() {
        let mut note = quarter_note(Pitch::new(Step::D, 5));
        note.grace = Grace::Plain;
        assert_eq!(note.symbols().get(CategoryId::Grace), 1);
        note.grace = Grace::Slashed;
        assert_eq!(note.symbols().get(CategoryId::Grace), 2);
    }

    #[test]
    fn counting_is_compositional() {
        let mut measure = Measure::new(0);
        measure.notes.push(quarter_note(Pitch::new(Step::C, 4)));
        measure.rests.push(RestEvent::new(
            Offset::from_int(1),
            HeadType::Quarter,
            0,
            Offset::from_int(1),
        ));
        measure.non_notes.push(NonNoteObject::new(
            Offset::ZERO,
            NonNoteKind::TimeSignature(TimeSignature::numeric(2, 4)),
        ));
        let child_sum: u64 = measure.notes.iter().map(|n| n.symbols().total()).sum::<u64>()
            + measure.rests.iter().map(|r| r.symbols().total()).sum::<u64>()
            + measure.non_notes.iter().map(|o| o.symbols().total()).sum::<u64>();
        assert_eq!(measure.symbols().total(), 1 + child_sum);

        let part = Part {
            id: 0,
            measures: vec![measure],
        };
        let score = Score {
            parts: vec![part.clone()],
            staff_groups: vec![],
            source_warnings: vec![],
        };
        assert_eq!(score.total_symbols(), part.symbols().total());
        // the 2/4 fixture shape: part + measure + timesig(2) + note(2) + rest(1)
        assert_eq!(score.total_symbols(), 7);
    }

    #[test]
    fn empty_score_counts_zero() {
        assert_eq!(Score::new().total_symbols(), 0);
    }

    #[test]
    fn report_groups_cover_all_categories() {
        use std::collections::BTreeSet;
        let image: BTreeSet<ReportGroup> =
            CategoryId::ALL.iter().map(|&c| report_group(c)).collect();
        assert_eq!(image.len(), 6);
        assert_eq!(report_group(CategoryId::FlagsBeams), ReportGroup::Note);
        assert_eq!(report_group(CategoryId::Dynamic), ReportGroup::Extra);
        assert_eq!(report_group(CategoryId::Lyric), ReportGroup::Lyrics);
        assert_eq!(report_group(CategoryId::Ending), ReportGroup::Extra);
        assert_eq!(report_group(CategoryId::Measure), ReportGroup::Measure);
    }

    #[test]
    fn bag_addition_behaves_like_a_monoid() {
        let a = SymbolBag::single(CategoryId::Pitch, 2);
        let b = SymbolBag::single(CategoryId::Dots, 3);
        let c = SymbolBag::single(CategoryId::Pitch, 1);
        assert_eq!(a + b, b + a);
        assert_eq!((a + b) + c, a + (b + c));
        assert_eq!(a + SymbolBag::new(), a);
        assert_eq!((a + c).get(CategoryId::Pitch), 3);
    }

    #[test]
    fn validate_catches_bad_groups() {
        let mut score = Score::new();
        score.parts.push(Part::new(0));
        score.staff_groups.push(StaffGroup {
            member_parts: vec![0, 3],
        });
        assert!(matches!(
            score.validate(),
            Err(ModelError::DanglingGroupMember { member: 3 })
        ));
    }
}

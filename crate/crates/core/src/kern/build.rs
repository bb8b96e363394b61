//! Builds the visual-notation model from lexed kern records: per-voice
//! offset clocks, measure segmentation at barlines, beam grouping, slur and
//! hairpin span matching, and tandem interpretation handling.

use std::collections::BTreeMap;

use crate::model::{
    Clef, ClefShape, DynamicKind, FlagBeam, HairpinDirection, KeySignature, Measure,
    NonNoteKind, NonNoteObject, NoteEvent, Offset, OttavaKind, Part, RestEvent, Score, StaffGroup,
    TimeSignature, TimeSymbol, WarningKind,
};

use super::cell::{parse_data_cell, parse_dynam_cell, DataCell, ParsedNote};
use super::error::{Mode, Reporter, SyntaxError};
use super::lex::{LexOutput, LexRecord, RecordKind, SpineKind, TopoEvent};

#[derive(Debug, Default)]
struct MeasureData {
    notes: Vec<NoteEvent>,
    rests: Vec<RestEvent>,
    non_notes: Vec<NonNoteObject>,
}

impl MeasureData {
    fn has_content(&self) -> bool {
        !self.notes.is_empty() || !self.rests.is_empty() || !self.non_notes.is_empty()
    }
}

#[derive(Debug)]
struct PartBuilder {
    id: usize,
    marker: Option<u32>,
    done: Vec<MeasureData>,
    cur: MeasureData,
    /// Absolute start of the current measure, in quarters from the top.
    abs_start: Offset,
    /// Longest clock reached by a track that was closed inside the current
    /// measure; keeps the measure span honest after mid-file terminations.
    closed_clock_high: Offset,
    /// Notated span of the current meter, for the strict overflow check.
    span: Option<Offset>,
    text_spines: u32,
    has_dynam: bool,
    open_ottava: Option<OpenOttava>,
}

#[derive(Debug)]
struct OpenOttava {
    kind: OttavaKind,
    measure: usize,
    offset: Offset,
    abs: Offset,
    line: usize,
    column: usize,
}

impl PartBuilder {
    fn new(id: usize) -> PartBuilder {
        PartBuilder {
            id,
            marker: None,
            done: Vec::new(),
            cur: MeasureData::default(),
            abs_start: Offset::ZERO,
            closed_clock_high: Offset::ZERO,
            span: None,
            text_spines: 0,
            has_dynam: false,
            open_ottava: None,
        }
    }

    fn cur_index(&self) -> usize {
        self.done.len()
    }

    fn push_non_note(&mut self, measure: usize, obj: NonNoteObject) {
        if measure == self.done.len() {
            self.cur.non_notes.push(obj);
        } else {
            self.done[measure].non_notes.push(obj);
        }
    }

    fn measure_at(&self, measure: usize) -> &MeasureData {
        if measure == self.done.len() {
            &self.cur
        } else {
            &self.done[measure]
        }
    }
}

#[derive(Debug, Clone)]
struct SlurOpen {
    measure: usize,
    offset: Offset,
    abs: Offset,
    voice: usize,
    line: usize,
    column: usize,
}

#[derive(Debug, Default)]
struct VoiceState {
    clock: Offset,
    beam_depth: i32,
    slur_stack: Vec<SlurOpen>,
    pending_directions: Vec<String>,
}

#[derive(Debug, Clone)]
struct OpenHairpin {
    measure: usize,
    offset: Offset,
    abs: Offset,
    line: usize,
    column: usize,
}

#[derive(Debug, Default)]
struct DynamState {
    open_cresc: Option<OpenHairpin>,
    open_decresc: Option<OpenHairpin>,
}

pub fn build(lexed: &LexOutput, reporter: &mut Reporter) -> Result<Score, SyntaxError> {
    Builder::new(&lexed.spines, reporter)?.run(&lexed.records)
}

struct Builder<'a> {
    reporter: &'a mut Reporter,
    spine_part: Vec<Option<usize>>,
    spine_kind: Vec<SpineKind>,
    spine_verse: Vec<u32>,
    parts: Vec<PartBuilder>,
    voices: BTreeMap<usize, VoiceState>,
    dynams: BTreeMap<usize, DynamState>,
    track_spine: BTreeMap<usize, usize>,
    barline_seen: bool,
    data_seen: bool,
}

impl<'a> Builder<'a> {
    fn new(spines: &[SpineKind], reporter: &'a mut Reporter) -> Result<Builder<'a>, SyntaxError> {
        let mut spine_part: Vec<Option<usize>> = vec![None; spines.len()];
        let mut parts = Vec::new();
        for (i, kind) in spines.iter().enumerate() {
            if *kind == SpineKind::Kern {
                spine_part[i] = Some(parts.len());
                parts.push(PartBuilder::new(parts.len()));
            }
        }
        if parts.is_empty() && !spines.is_empty() {
            reporter.report(
                1,
                1,
                WarningKind::UnknownSpineType,
                "document has no **kern spine; attaching content to an empty part",
            )?;
            parts.push(PartBuilder::new(0));
        }
        // dynam/text spines attach to the nearest kern spine on their left,
        // falling back to the nearest on the right
        let mut spine_verse = vec![0u32; spines.len()];
        for (i, kind) in spines.iter().enumerate() {
            if matches!(kind, SpineKind::Dynam | SpineKind::Text) {
                let left = (0..i).rev().find(|&j| spines[j] == SpineKind::Kern);
                let right = (i + 1..spines.len()).find(|&j| spines[j] == SpineKind::Kern);
                let owner = left
                    .or(right)
                    .and_then(|j| spine_part[j])
                    .unwrap_or(0);
                spine_part[i] = Some(owner);
                match kind {
                    SpineKind::Dynam => parts[owner].has_dynam = true,
                    SpineKind::Text => {
                        parts[owner].text_spines += 1;
                        spine_verse[i] = parts[owner].text_spines;
                    }
                    _ => unreachable!(),
                }
            }
        }
        Ok(Builder {
            reporter,
            spine_part,
            spine_kind: spines.to_vec(),
            spine_verse,
            parts,
            voices: BTreeMap::new(),
            dynams: BTreeMap::new(),
            track_spine: BTreeMap::new(),
            barline_seen: false,
            data_seen: false,
        })
    }

    fn run(mut self, records: &[LexRecord]) -> Result<Score, SyntaxError> {
        for record in records {
            for cell in &record.cells {
                self.track_spine.entry(cell.track).or_insert(cell.spine);
            }
            match record.kind {
                RecordKind::Data => self.data_record(record)?,
                RecordKind::Barline => self.barline_record()?,
                RecordKind::Interpretation => self.interpretation_record(record)?,
                RecordKind::LocalComment => self.local_comment_record(record),
            }
            for event in &record.events {
                self.apply_topology(event);
            }
        }
        self.finish()
    }

    fn part_of_spine(&self, spine: usize) -> usize {
        self.spine_part.get(spine).copied().flatten().unwrap_or(0)
    }

    fn apply_topology(&mut self, event: &TopoEvent) {
        match event {
            TopoEvent::Split { parent, child } => {
                if let Some(kind) = self.kind_of_track(*parent) {
                    if kind == SpineKind::Kern {
                        let clock = self
                            .voices
                            .get(parent)
                            .map(|v| v.clock)
                            .unwrap_or(Offset::ZERO);
                        let state = VoiceState {
                            clock,
                            ..VoiceState::default()
                        };
                        self.voices.insert(*child, state);
                        if let Some(spine) = self.track_spine.get(parent).copied() {
                            self.track_spine.insert(*child, spine);
                        }
                    }
                }
            }
            TopoEvent::Merge { survivor, absorbed } => {
                for t in absorbed {
                    if let Some(gone) = self.voices.remove(t) {
                        let spine = self.track_spine.get(t).copied();
                        let part = spine.map(|s| self.part_of_spine(s)).unwrap_or(0);
                        self.parts[part].closed_clock_high =
                            self.parts[part].closed_clock_high.max(gone.clock);
                        if let Some(surv) = self.voices.get_mut(survivor) {
                            surv.clock = surv.clock.max(gone.clock);
                            surv.slur_stack.extend(gone.slur_stack);
                            surv.beam_depth += gone.beam_depth;
                            surv.pending_directions.extend(gone.pending_directions);
                        }
                    }
                    self.dynams.remove(t);
                }
            }
            TopoEvent::Close { track } => {
                if let Some(gone) = self.voices.remove(track) {
                    let spine = self.track_spine.get(track).copied();
                    let part = spine.map(|s| self.part_of_spine(s)).unwrap_or(0);
                    self.parts[part].closed_clock_high =
                        self.parts[part].closed_clock_high.max(gone.clock);
                }
                self.dynams.remove(track);
            }
        }
    }

    fn kind_of_track(&self, track: usize) -> Option<SpineKind> {
        self.track_spine
            .get(&track)
            .and_then(|s| self.spine_kind.get(*s).copied())
    }

    /// Index of a kern track among its part's kern cells within one record.
    fn voice_indices(&self, record: &LexRecord) -> BTreeMap<usize, usize> {
        let mut per_part: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for cell in &record.cells {
            if self.spine_kind.get(cell.spine) == Some(&SpineKind::Kern) {
                let part = self.part_of_spine(cell.spine);
                let n = per_part.entry(part).or_insert(0);
                out.insert(cell.track, *n);
                *n += 1;
            }
        }
        out
    }

    fn data_record(&mut self, record: &LexRecord) -> Result<(), SyntaxError> {
        let voice_idx = self.voice_indices(record);

        // reference offset per part: the earliest onset among this record's
        // sounding kern cells, falling back to the earliest kern clock
        let mut ref_offset: BTreeMap<usize, Offset> = BTreeMap::new();
        let mut fallback: BTreeMap<usize, Offset> = BTreeMap::new();
        for cell in &record.cells {
            if self.spine_kind.get(cell.spine) != Some(&SpineKind::Kern) {
                continue;
            }
            let part = self.part_of_spine(cell.spine);
            let clock = self
                .voices
                .get(&cell.track)
                .map(|v| v.clock)
                .unwrap_or(Offset::ZERO);
            fallback
                .entry(part)
                .and_modify(|c| *c = (*c).min(clock))
                .or_insert(clock);
            if cell.text != "." {
                ref_offset
                    .entry(part)
                    .and_modify(|c| *c = (*c).min(clock))
                    .or_insert(clock);
            }
        }
        for (part, clock) in fallback {
            ref_offset.entry(part).or_insert(clock);
        }

        for cell in &record.cells {
            let spine_kind = match self.spine_kind.get(cell.spine) {
                Some(k) => *k,
                None => continue,
            };
            let part = self.part_of_spine(cell.spine);
            match spine_kind {
                SpineKind::Kern => {
                    let voice = voice_idx.get(&cell.track).copied().unwrap_or(0);
                    self.kern_data_cell(cell, part, voice)?;
                }
                SpineKind::Dynam => {
                    let at = *ref_offset.get(&part).unwrap_or(&Offset::ZERO);
                    self.dynam_data_cell(cell, part, at)?;
                }
                SpineKind::Text => {
                    if cell.text != "." && !cell.text.is_empty() {
                        let at = *ref_offset.get(&part).unwrap_or(&Offset::ZERO);
                        let verse = self.spine_verse.get(cell.spine).copied().unwrap_or(1).max(1);
                        let measure = self.parts[part].cur_index();
                        self.parts[part].push_non_note(
                            measure,
                            NonNoteObject {
                                offset: at,
                                kind: NonNoteKind::Lyric {
                                    syllable: cell.text.clone(),
                                    verse,
                                },
                                voice: 0,
                            },
                        );
                    }
                }
                SpineKind::Other => {}
            }
        }
        Ok(())
    }

    fn kern_data_cell(
        &mut self,
        cell: &super::lex::LexCell,
        part: usize,
        voice: usize,
    ) -> Result<(), SyntaxError> {
        let (parsed, issues) = parse_data_cell(&cell.text);
        for issue in &issues {
            self.reporter.report(
                cell.line,
                cell.column + issue.at,
                WarningKind::DroppedCharacters,
                format!("in '{}': {}", cell.text, issue.message),
            )?;
        }
        let state = self.voices.entry(cell.track).or_default();
        let clock = state.clock;
        match parsed {
            DataCell::Null => Ok(()),
            DataCell::Rest(rest) => {
                let duration = rest.duration();
                self.check_overflow(part, clock, cell)?;
                self.data_seen = true;
                let state = self.voices.get_mut(&cell.track).unwrap();
                state.clock += duration;
                self.slur_marks(cell, part, voice, clock, &rest)?;
                self.flush_directions(cell.track, part, voice, clock);
                let measure = self.parts[part].cur_index();
                let rest_event = RestEvent {
                    offset: clock,
                    head: rest.head(),
                    dots: rest.dots,
                    duration,
                    voice,
                };
                if measure == self.parts[part].done.len() {
                    self.parts[part].cur.rests.push(rest_event);
                } else {
                    self.parts[part].done[measure].rests.push(rest_event);
                }
                Ok(())
            }
            DataCell::Notes(notes) => {
                let duration = notes[0].duration();
                for extra in &notes[1..] {
                    if extra.duration() != duration {
                        self.reporter.report(
                            cell.line,
                            cell.column,
                            WarningKind::ChordDurationMismatch,
                            format!("chord '{}' mixes durations; the first wins", cell.text),
                        )?;
                        break;
                    }
                }
                self.check_overflow(part, clock, cell)?;
                self.data_seen = true;

                // beam bookkeeping is per cell: the widest open/close marks
                // of any subtoken drive the depth
                let opens = notes.iter().map(|n| n.beam_opens).max().unwrap_or(0);
                let closes = notes.iter().map(|n| n.beam_closes).max().unwrap_or(0);
                let tails = notes[0].tail_count();
                if tails == 0 && (opens > 0 || closes > 0) {
                    self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedBeam,
                        format!("beam marks on unbeamable duration in '{}'", cell.text),
                    )?;
                }
                let state = self.voices.get_mut(&cell.track).unwrap();
                let pre_depth = state.beam_depth;
                state.beam_depth += opens as i32 - closes as i32;
                let negative = state.beam_depth < 0;
                if negative {
                    state.beam_depth = 0;
                }
                if negative {
                    self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedBeam,
                        "beam closed without an open beam group",
                    )?;
                }
                let beamed = pre_depth > 0 || opens > 0 || closes > 0;

                for sub in &notes {
                    self.slur_marks(cell, part, voice, clock, sub)?;
                }
                self.flush_directions(cell.track, part, voice, clock);

                let measure = self.parts[part].cur_index();
                for sub in &notes {
                    let mark = if sub.tail_count() > 0 && beamed {
                        FlagBeam::Beam
                    } else {
                        FlagBeam::Flag
                    };
                    // articulations and ornaments are multisets; keep them
                    // in canonical order so value equality matches
                    let mut articulations = sub.articulations.clone();
                    articulations.sort();
                    let mut ornaments = sub.ornaments.clone();
                    ornaments.sort();
                    let note = NoteEvent {
                        offset: clock,
                        pitch: sub.pitch.expect("note subtokens carry a pitch"),
                        accidental: sub.accidental,
                        tie_to_next: sub.tie_begin || sub.tie_continue,
                        tie_from_prev: sub.tie_end || sub.tie_continue,
                        head: sub.head(),
                        flags_beams: vec![mark; sub.tail_count() as usize],
                        dots: sub.dots,
                        articulations,
                        ornaments,
                        grace: sub.grace(),
                        duration: sub.duration(),
                        voice,
                    };
                    if measure == self.parts[part].done.len() {
                        self.parts[part].cur.notes.push(note);
                    } else {
                        self.parts[part].done[measure].notes.push(note);
                    }
                }
                let state = self.voices.get_mut(&cell.track).unwrap();
                state.clock += duration;
                Ok(())
            }
        }
    }

    fn check_overflow(
        &mut self,
        part: usize,
        offset: Offset,
        cell: &super::lex::LexCell,
    ) -> Result<(), SyntaxError> {
        if self.reporter.mode == Mode::Strict {
            if let Some(span) = self.parts[part].span {
                if offset >= span {
                    return Err(SyntaxError::new(
                        cell.line,
                        cell.column,
                        format!(
                            "event at offset {offset} overflows the measure span {span}"
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    fn slur_marks(
        &mut self,
        cell: &super::lex::LexCell,
        part: usize,
        voice: usize,
        clock: Offset,
        sub: &ParsedNote,
    ) -> Result<(), SyntaxError> {
        let abs = self.parts[part].abs_start + clock;
        let measure = self.parts[part].cur_index();
        for _ in 0..sub.slur_opens {
            let state = self.voices.entry(cell.track).or_default();
            state.slur_stack.push(SlurOpen {
                measure,
                offset: clock,
                abs,
                voice,
                line: cell.line,
                column: cell.column,
            });
        }
        for _ in 0..sub.slur_closes {
            let state = self.voices.entry(cell.track).or_default();
            match state.slur_stack.pop() {
                Some(open) => {
                    let duration = abs.saturating_sub(open.abs);
                    self.parts[part].push_non_note(
                        open.measure,
                        NonNoteObject {
                            offset: open.offset,
                            kind: NonNoteKind::Slur { duration },
                            voice: open.voice,
                        },
                    );
                }
                None => {
                    self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedSlur,
                        "slur closed without an open slur",
                    )?;
                }
            }
        }
        Ok(())
    }

    fn flush_directions(&mut self, track: usize, part: usize, voice: usize, clock: Offset) {
        let state = self.voices.entry(track).or_default();
        let pending = std::mem::take(&mut state.pending_directions);
        let measure = self.parts[part].cur_index();
        for text in pending {
            self.parts[part].push_non_note(
                measure,
                NonNoteObject {
                    offset: clock,
                    kind: NonNoteKind::Direction { text },
                    voice,
                },
            );
        }
    }

    fn dynam_data_cell(
        &mut self,
        cell: &super::lex::LexCell,
        part: usize,
        at: Offset,
    ) -> Result<(), SyntaxError> {
        let (parsed, issues) = parse_dynam_cell(&cell.text);
        for issue in &issues {
            self.reporter.report(
                cell.line,
                cell.column + issue.at,
                WarningKind::DroppedCharacters,
                format!("in dynamics '{}': {}", cell.text, issue.message),
            )?;
        }
        let abs = self.parts[part].abs_start + at;
        let measure = self.parts[part].cur_index();

        for (count, direction) in [
            (parsed.cresc_ends, HairpinDirection::Crescendo),
            (parsed.decresc_ends, HairpinDirection::Decrescendo),
        ] {
            for _ in 0..count {
                let state = self.dynams.entry(cell.track).or_default();
                let slot = match direction {
                    HairpinDirection::Crescendo => state.open_cresc.take(),
                    HairpinDirection::Decrescendo => state.open_decresc.take(),
                };
                match slot {
                    Some(open) => {
                        let duration = abs.saturating_sub(open.abs);
                        self.parts[part].push_non_note(
                            open.measure,
                            NonNoteObject {
                                offset: open.offset,
                                kind: NonNoteKind::Dynamic(DynamicKind::Hairpin {
                                    direction,
                                    duration,
                                }),
                                voice: 0,
                            },
                        );
                    }
                    None => {
                        self.reporter.report(
                            cell.line,
                            cell.column,
                            WarningKind::UnbalancedHairpin,
                            "hairpin end without a matching start",
                        )?;
                    }
                }
            }
        }
        for (count, direction) in [
            (parsed.cresc_starts, HairpinDirection::Crescendo),
            (parsed.decresc_starts, HairpinDirection::Decrescendo),
        ] {
            for _ in 0..count {
                let open = OpenHairpin {
                    measure,
                    offset: at,
                    abs,
                    line: cell.line,
                    column: cell.column,
                };
                let state = self.dynams.entry(cell.track).or_default();
                let slot = match direction {
                    HairpinDirection::Crescendo => &mut state.open_cresc,
                    HairpinDirection::Decrescendo => &mut state.open_decresc,
                };
                let prev = slot.replace(open);
                if let Some(prev) = prev {
                    self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedHairpin,
                        "hairpin reopened before the previous one ended; dropped the open one",
                    )?;
                    let _ = prev;
                }
            }
        }
        if let Some(mark) = parsed.mark {
            self.parts[part].push_non_note(
                measure,
                NonNoteObject {
                    offset: at,
                    kind: NonNoteKind::Dynamic(DynamicKind::Mark(mark)),
                    voice: 0,
                },
            );
        }
        Ok(())
    }

    fn barline_record(&mut self) -> Result<(), SyntaxError> {
        let skip = !self.barline_seen && !self.data_seen && self.parts.iter().all(|p| p.done.is_empty());
        self.barline_seen = true;
        if skip {
            return Ok(());
        }
        self.finalize_measures()
    }

    fn finalize_measures(&mut self) -> Result<(), SyntaxError> {
        // beams do not cross barlines
        let mut unbalanced = None;
        for (track, state) in self.voices.iter_mut() {
            if state.beam_depth != 0 {
                unbalanced = Some(*track);
                state.beam_depth = 0;
            }
        }
        if unbalanced.is_some() {
            self.reporter.report(
                0,
                0,
                WarningKind::UnbalancedBeam,
                "beam group left open at a barline",
            )?;
        }
        for part_id in 0..self.parts.len() {
            let mut content_span = self.parts[part_id].closed_clock_high;
            for (track, state) in self.voices.iter() {
                let spine = self.track_spine.get(track).copied();
                let is_kern = spine
                    .and_then(|s| self.spine_kind.get(s))
                    .map(|k| *k == SpineKind::Kern)
                    .unwrap_or(false);
                if is_kern && spine.map(|s| self.part_of_spine(s)) == Some(part_id) {
                    content_span = content_span.max(state.clock);
                }
            }
            let part = &mut self.parts[part_id];
            let index = part.done.len();
            let data = std::mem::take(&mut part.cur);
            part.done.push(data);
            let _ = index;
            part.abs_start += content_span;
            part.closed_clock_high = Offset::ZERO;
        }
        for state in self.voices.values_mut() {
            state.clock = Offset::ZERO;
        }
        Ok(())
    }

    fn interpretation_record(&mut self, record: &LexRecord) -> Result<(), SyntaxError> {
        for cell in &record.cells {
            if self.spine_kind.get(cell.spine) != Some(&SpineKind::Kern) {
                continue;
            }
            let part = self.part_of_spine(cell.spine);
            let clock = self
                .voices
                .get(&cell.track)
                .map(|v| v.clock)
                .unwrap_or(Offset::ZERO);
            self.kern_tandem(cell, part, clock)?;
        }
        Ok(())
    }

    fn kern_tandem(
        &mut self,
        cell: &super::lex::LexCell,
        part: usize,
        clock: Offset,
    ) -> Result<(), SyntaxError> {
        let text = cell.text.as_str();
        match classify_tandem(text) {
            Tandem::Structural | Tandem::Ignorable => Ok(()),
            Tandem::Unknown => self.reporter.report(
                cell.line,
                cell.column,
                WarningKind::UnknownInterpretation,
                format!("unknown interpretation '{text}' ignored"),
            ),
            Tandem::Malformed(what) => self.reporter.report(
                cell.line,
                cell.column,
                WarningKind::UnknownInterpretation,
                format!("malformed {what} interpretation '{text}' ignored"),
            ),
            Tandem::PartMarker(n) => {
                if self.parts[part].marker.is_none() {
                    self.parts[part].marker = Some(n);
                }
                Ok(())
            }
            Tandem::Clef(clef) => {
                self.push_unique(part, clock, NonNoteKind::Clef(clef));
                Ok(())
            }
            Tandem::KeySig(accidentals) => {
                self.push_unique(part, clock, NonNoteKind::KeySignature(KeySignature { accidentals }));
                Ok(())
            }
            Tandem::TimeSig(top, bottom) => {
                let sig = TimeSignature::numeric(top, bottom);
                self.parts[part].span = sig.span_quarters();
                self.push_unique(part, clock, NonNoteKind::TimeSignature(sig));
                Ok(())
            }
            Tandem::MetSymbol(symbol) => {
                let measure = self.parts[part].cur_index();
                let merged = {
                    let part_builder = &mut self.parts[part];
                    let data = if measure == part_builder.done.len() {
                        &mut part_builder.cur
                    } else {
                        &mut part_builder.done[measure]
                    };
                    let mut merged = false;
                    for obj in data.non_notes.iter_mut().rev() {
                        if obj.offset != clock {
                            continue;
                        }
                        if let NonNoteKind::TimeSignature(sig) = &mut obj.kind {
                            if sig.symbol == TimeSymbol::None {
                                sig.symbol = symbol;
                            }
                            merged = true;
                            break;
                        }
                    }
                    merged
                };
                if !merged {
                    let sig = TimeSignature::symbolic(symbol);
                    if self.parts[part].span.is_none() {
                        self.parts[part].span = sig.span_quarters();
                    }
                    self.push_unique(part, clock, NonNoteKind::TimeSignature(sig));
                }
                Ok(())
            }
            Tandem::OttavaStart(kind) => {
                let measure = self.parts[part].cur_index();
                let abs = self.parts[part].abs_start + clock;
                let prev = self.parts[part].open_ottava.replace(OpenOttava {
                    kind,
                    measure,
                    offset: clock,
                    abs,
                    line: cell.line,
                    column: cell.column,
                });
                if prev.is_some() {
                    self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedOttava,
                        "ottava opened while another was active; dropped the open one",
                    )?;
                }
                Ok(())
            }
            Tandem::OttavaEnd(kind) => {
                let abs = self.parts[part].abs_start + clock;
                match self.parts[part].open_ottava.take() {
                    Some(open) if open.kind == kind => {
                        let duration = abs.saturating_sub(open.abs);
                        self.parts[part].push_non_note(
                            open.measure,
                            NonNoteObject {
                                offset: open.offset,
                                kind: NonNoteKind::Ottava { kind, duration },
                                voice: 0,
                            },
                        );
                        Ok(())
                    }
                    Some(open) => {
                        self.parts[part].open_ottava = Some(open);
                        self.reporter.report(
                            cell.line,
                            cell.column,
                            WarningKind::UnbalancedOttava,
                            format!("'{text}' does not match the open ottava"),
                        )
                    }
                    None => self.reporter.report(
                        cell.line,
                        cell.column,
                        WarningKind::UnbalancedOttava,
                        "ottava end without a start",
                    ),
                }
            }
        }
    }

    /// Pushes a clef/key/time object unless an identical one already sits at
    /// the same offset of the current measure (sub-spines repeat tandems).
    fn push_unique(&mut self, part: usize, clock: Offset, kind: NonNoteKind) {
        let measure = self.parts[part].cur_index();
        let exists = self.parts[part]
            .measure_at(measure)
            .non_notes
            .iter()
            .any(|o| o.offset == clock && o.kind == kind);
        if !exists {
            self.parts[part].push_non_note(
                measure,
                NonNoteObject {
                    offset: clock,
                    kind,
                    voice: 0,
                },
            );
        }
    }

    fn local_comment_record(&mut self, record: &LexRecord) {
        for cell in &record.cells {
            if self.spine_kind.get(cell.spine) != Some(&SpineKind::Kern) {
                continue;
            }
            if let Some(text) = parse_direction_comment(&cell.text) {
                let state = self.voices.entry(cell.track).or_default();
                state.pending_directions.push(text);
            }
        }
    }

    fn finish(mut self) -> Result<Score, SyntaxError> {
        // leftover directions attach at the current position
        let tracks: Vec<usize> = self.voices.keys().copied().collect();
        for track in tracks {
            let (pending, clock) = {
                let state = self.voices.get_mut(&track).unwrap();
                (std::mem::take(&mut state.pending_directions), state.clock)
            };
            if pending.is_empty() {
                continue;
            }
            let spine = self.track_spine.get(&track).copied().unwrap_or(0);
            let part = self.part_of_spine(spine);
            let measure = self.parts[part].cur_index();
            for text in pending {
                self.parts[part].push_non_note(
                    measure,
                    NonNoteObject {
                        offset: clock,
                        kind: NonNoteKind::Direction { text },
                        voice: 0,
                    },
                );
            }
        }

        // unbalanced spans
        let open_slurs: Vec<(usize, usize)> = self
            .voices
            .values()
            .flat_map(|v| v.slur_stack.iter().map(|s| (s.line, s.column)))
            .collect();
        for (line, column) in open_slurs {
            self.reporter.report(
                line,
                column,
                WarningKind::UnbalancedSlur,
                "slur never closed; dropped",
            )?;
        }
        let open_hairpins: Vec<(usize, usize)> = self
            .dynams
            .values()
            .flat_map(|d| {
                d.open_cresc
                    .iter()
                    .chain(d.open_decresc.iter())
                    .map(|h| (h.line, h.column))
            })
            .collect();
        for (line, column) in open_hairpins {
            self.reporter.report(
                line,
                column,
                WarningKind::UnbalancedHairpin,
                "hairpin never closed; dropped",
            )?;
        }
        for part_id in 0..self.parts.len() {
            if let Some(open) = self.parts[part_id].open_ottava.take() {
                self.reporter.report(
                    open.line,
                    open.column,
                    WarningKind::UnbalancedOttava,
                    "ottava never closed; dropped",
                )?;
            }
        }

        // trailing measure: keep it when anything is in it
        if self.parts.iter().any(|p| p.cur.has_content()) {
            self.finalize_measures()?;
        }

        // staff groups from part markers: maximal runs of >= 2 parts sharing
        // a marker
        let mut staff_groups = Vec::new();
        let mut i = 0usize;
        while i < self.parts.len() {
            let marker = self.parts[i].marker;
            let mut j = i + 1;
            if let Some(m) = marker {
                while j < self.parts.len() && self.parts[j].marker == Some(m) {
                    j += 1;
                }
                if j - i >= 2 {
                    staff_groups.push(StaffGroup {
                        member_parts: (i..j).collect(),
                    });
                }
            }
            i = j.max(i + 1);
        }

        let mut parts = Vec::new();
        for pb in self.parts.into_iter() {
            let mut measures = Vec::new();
            for (index, data) in pb.done.into_iter().enumerate() {
                let mut m = Measure::new(index);
                m.notes = data.notes;
                m.rests = data.rests;
                m.non_notes = data.non_notes;
                normalize_measure(&mut m);
                measures.push(m);
            }
            parts.push(Part {
                id: pb.id,
                measures,
            });
        }

        Ok(Score {
            parts,
            staff_groups,
            source_warnings: Vec::new(),
        })
    }
}

/// Deterministic content order within a measure, independent of the record
/// interleaving the source happened to use.
pub fn normalize_measure(m: &mut Measure) {
    m.notes.sort_by(|a, b| {
        (a.offset, a.voice, a.pitch.octave, a.pitch.step, a.accidental)
            .cmp(&(b.offset, b.voice, b.pitch.octave, b.pitch.step, b.accidental))
    });
    m.rests
        .sort_by(|a, b| (a.offset, a.voice, a.dots).cmp(&(b.offset, b.voice, b.dots)));
    m.non_notes.sort_by(|a, b| {
        (a.offset, non_note_rank(&a.kind), a.voice)
            .cmp(&(b.offset, non_note_rank(&b.kind), b.voice))
            .then_with(|| format!("{:?}", a.kind).cmp(&format!("{:?}", b.kind)))
    });
}

fn non_note_rank(kind: &NonNoteKind) -> u8 {
    match kind {
        NonNoteKind::Clef(_) => 0,
        NonNoteKind::KeySignature(_) => 1,
        NonNoteKind::TimeSignature(_) => 2,
        NonNoteKind::Ottava { .. } => 3,
        NonNoteKind::Direction { .. } => 4,
        NonNoteKind::Dynamic(_) => 5,
        NonNoteKind::Slur { .. } => 6,
        NonNoteKind::Lyric { .. } => 7,
        NonNoteKind::Arpeggio { .. } => 8,
        NonNoteKind::ChordSymbol => 9,
        NonNoteKind::Ending { .. } => 10,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tandem {
    /// Spine paths and terminators; topology already handled by the lexer.
    Structural,
    /// Recognized and deliberately not modeled (tempo, instrument, etc).
    Ignorable,
    Unknown,
    Malformed(&'static str),
    PartMarker(u32),
    Clef(Clef),
    KeySig(i8),
    TimeSig(u32, u32),
    MetSymbol(TimeSymbol),
    OttavaStart(OttavaKind),
    OttavaEnd(OttavaKind),
}

fn classify_tandem(text: &str) -> Tandem {
    match text {
        "*" | "*-" | "*^" | "*v" | "*+" | "*x" => return Tandem::Structural,
        "*8va" => return Tandem::OttavaStart(OttavaKind::Up8),
        "*X8va" => return Tandem::OttavaEnd(OttavaKind::Up8),
        "*8ba" => return Tandem::OttavaStart(OttavaKind::Down8),
        "*X8ba" => return Tandem::OttavaEnd(OttavaKind::Down8),
        "*15ma" => return Tandem::OttavaStart(OttavaKind::Up15),
        "*X15ma" => return Tandem::OttavaEnd(OttavaKind::Up15),
        "*15ba" | "*15mb" => return Tandem::OttavaStart(OttavaKind::Down15),
        "*X15ba" | "*X15mb" => return Tandem::OttavaEnd(OttavaKind::Down15),
        "*met(c)" => return Tandem::MetSymbol(TimeSymbol::Common),
        "*met(c|)" => return Tandem::MetSymbol(TimeSymbol::Cut),
        _ => {}
    }
    let body = &text[1..];
    if let Some(rest) = body.strip_prefix("part") {
        return match rest.parse::<u32>() {
            Ok(n) => Tandem::PartMarker(n),
            Err(_) => Tandem::Malformed("part"),
        };
    }
    if let Some(rest) = body.strip_prefix("clef") {
        return parse_clef(rest);
    }
    if let Some(rest) = body.strip_prefix("k[") {
        return match rest.strip_suffix(']') {
            Some(inner) => parse_keysig(inner),
            None => Tandem::Malformed("key signature"),
        };
    }
    if let Some(rest) = body.strip_prefix("MM") {
        // tempo marking
        let _ = rest;
        return Tandem::Ignorable;
    }
    if let Some(rest) = body.strip_prefix('M') {
        return parse_timesig(rest);
    }
    if is_key_designation(body) {
        return Tandem::Ignorable;
    }
    const IGNORABLE_PREFIXES: [&str; 24] = [
        "I", "staff", "group", "met(", "ped", "Xped", "tb", "timebase", "tuplet", "Xtuplet",
        "brackettup", "Xbrackettup", "cue", "Xcue", "rscale", "grp", "strophe", "Xstrophe", "S/",
        "solo", "Xsolo", ">", "head", "font",
    ];
    for prefix in IGNORABLE_PREFIXES {
        if body.starts_with(prefix) {
            return Tandem::Ignorable;
        }
    }
    Tandem::Unknown
}

/// Key designations such as `*C:`, `*f#:`, `*B-:dor`.
fn is_key_designation(body: &str) -> bool {
    let mut chars = body.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() && matches!(c.to_ascii_lowercase(), 'a'..='g') => {}
        _ => return false,
    }
    let rest: String = chars.collect();
    let rest = rest.trim_start_matches(['#', '-']);
    rest.starts_with(':')
}

fn parse_clef(rest: &str) -> Tandem {
    let mut chars = rest.chars().peekable();
    let shape = match chars.next() {
        Some('G') => ClefShape::G,
        Some('F') => ClefShape::F,
        Some('C') => ClefShape::C,
        Some('X') => ClefShape::Percussion,
        _ => return Tandem::Malformed("clef"),
    };
    let mut octave_shift = 0i8;
    while let Some(&c) = chars.peek() {
        match c {
            'v' => {
                octave_shift -= 1;
                chars.next();
            }
            '^' => {
                octave_shift += 1;
                chars.next();
            }
            _ => break,
        }
    }
    let digits: String = chars.collect();
    let line = if digits.is_empty() {
        if shape == ClefShape::Percussion {
            0
        } else {
            return Tandem::Malformed("clef");
        }
    } else {
        match digits.parse::<u8>() {
            Ok(l) if l <= 5 => l,
            _ => return Tandem::Malformed("clef"),
        }
    };
    if octave_shift.abs() > 2 {
        return Tandem::Malformed("clef");
    }
    Tandem::Clef(Clef {
        shape,
        line,
        octave_shift,
    })
}

fn parse_keysig(inner: &str) -> Tandem {
    let mut sharps = 0i8;
    let mut flats = 0i8;
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        if !c.is_ascii_alphabetic() {
            return Tandem::Malformed("key signature");
        }
        match chars.next() {
            Some('#') => sharps += 1,
            Some('-') => flats += 1,
            Some('n') => {}
            _ => return Tandem::Malformed("key signature"),
        }
    }
    if sharps > 0 && flats > 0 {
        return Tandem::Malformed("key signature");
    }
    Tandem::KeySig(if flats > 0 { -flats } else { sharps })
}

fn parse_timesig(rest: &str) -> Tandem {
    let Some((top, bottom)) = rest.split_once('/') else {
        return Tandem::Malformed("time signature");
    };
    match (top.parse::<u32>(), bottom.parse::<u32>()) {
        (Ok(t), Ok(b)) if t >= 1 && b >= 1 && t <= 128 && b <= 128 => Tandem::TimeSig(t, b),
        _ => Tandem::Malformed("time signature"),
    }
}

/// Extracts the text payload of a `!LO:TX` layout comment.
fn parse_direction_comment(cell: &str) -> Option<String> {
    let rest = cell.strip_prefix("!LO:TX")?;
    for param in rest.split(':') {
        if let Some(text) = param.strip_prefix("t=") {
            return Some(text.replace("&colon;", ":"));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tandem_classification() {
        assert_eq!(classify_tandem("*M2/4"), Tandem::TimeSig(2, 4));
        assert_eq!(classify_tandem("*MM120"), Tandem::Ignorable);
        assert_eq!(
            classify_tandem("*clefG2"),
            Tandem::Clef(Clef {
                shape: ClefShape::G,
                line: 2,
                octave_shift: 0
            })
        );
        assert_eq!(
            classify_tandem("*clefGv2"),
            Tandem::Clef(Clef {
                shape: ClefShape::G,
                line: 2,
                octave_shift: -1
            })
        );
        assert_eq!(classify_tandem("*k[f#c#]"), Tandem::KeySig(2));
        assert_eq!(classify_tandem("*k[b-e-a-]"), Tandem::KeySig(-3));
        assert_eq!(classify_tandem("*k[]"), Tandem::KeySig(0));
        assert_eq!(classify_tandem("*C:"), Tandem::Ignorable);
        assert_eq!(classify_tandem("*f#:"), Tandem::Ignorable);
        assert_eq!(classify_tandem("*part2"), Tandem::PartMarker(2));
        assert_eq!(classify_tandem("*zzz"), Tandem::Unknown);
        assert_eq!(classify_tandem("*met(c|)"), Tandem::MetSymbol(TimeSymbol::Cut));
        assert_eq!(classify_tandem("*8va"), Tandem::OttavaStart(OttavaKind::Up8));
    }

    #[test]
    fn direction_comment_payload() {
        assert_eq!(
            parse_direction_comment("!LO:TX:a:t=rit."),
            Some("rit.".to_string())
        );
        assert_eq!(
            parse_direction_comment("!LO:TX:t=a&colon;b"),
            Some("a:b".to_string())
        );
        assert_eq!(parse_direction_comment("!just a comment"), None);
    }
}

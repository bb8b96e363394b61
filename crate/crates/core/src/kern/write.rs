//! Serializes a `Score` back to canonical kern text.
//!
//! The output is the one canonical form: per-note subtokens in fixed order,
//! explicit header/terminator records, barlines numbered from 1, and
//! measure-relative time reconstructed from each voice's event durations.
//! Re-parsing the output yields an equivalent model, which is what makes
//! `standardize` idempotent.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    DynamicKind, FlagBeam, HairpinDirection, Measure, NonNoteKind, NoteEvent, Offset, Part, Score,
    TimeSymbol,
};

use super::cell::ParsedNote;
use super::error::WriteError;

pub fn write_kern(score: &Score) -> Result<String, WriteError> {
    if score.parts.is_empty() {
        return Ok(String::new());
    }
    let layouts: Vec<PartLayout> = score
        .parts
        .iter()
        .map(|p| PartLayout::analyze(p))
        .collect();
    let measure_count = score.parts.iter().map(|p| p.measures.len()).max().unwrap_or(0);

    let mut w = Writer {
        score,
        layouts,
        kern_columns: score.parts.iter().map(|_| 1usize).collect(),
        lines: Vec::new(),
    };
    w.emit_header();
    for i in 0..measure_count {
        w.emit_measure(i)?;
    }
    w.emit_uniform("*-", "*-", "*-");
    let mut out = w.lines.join("\n");
    out.push('\n');
    Ok(out)
}

/// Precomputed per-part serialization facts: measure spans, absolute starts,
/// span endpoints for slurs/hairpins/ottavas, and spine needs.
struct PartLayout {
    has_dynam: bool,
    verses: u32,
    /// Absolute start of each measure (content-length based).
    starts: Vec<Offset>,
    /// (measure, offset, voice) -> count of slur closes landing there.
    slur_closes: BTreeMap<(usize, Offset, usize), usize>,
    /// (measure, offset) -> hairpin end marks.
    hairpin_ends: BTreeMap<(usize, Offset), Vec<HairpinDirection>>,
    /// (measure, offset) -> ottava end kinds.
    ottava_ends: BTreeMap<(usize, Offset), Vec<crate::model::OttavaKind>>,
}

impl PartLayout {
    fn analyze(part: &Part) -> PartLayout {
        let mut starts = Vec::with_capacity(part.measures.len());
        let mut acc = Offset::ZERO;
        for m in &part.measures {
            starts.push(acc);
            acc += measure_content_span(m);
        }
        starts.push(acc); // sentinel: end of the last measure

        let mut layout = PartLayout {
            has_dynam: false,
            verses: 0,
            starts,
            slur_closes: BTreeMap::new(),
            hairpin_ends: BTreeMap::new(),
            ottava_ends: BTreeMap::new(),
        };
        for (mi, m) in part.measures.iter().enumerate() {
            for obj in &m.non_notes {
                match &obj.kind {
                    NonNoteKind::Dynamic(kind) => {
                        layout.has_dynam = true;
                        if let DynamicKind::Hairpin {
                            direction,
                            duration,
                        } = kind
                        {
                            let (em, eo) = layout.locate(mi, obj.offset, *duration);
                            layout
                                .hairpin_ends
                                .entry((em, eo))
                                .or_default()
                                .push(*direction);
                        }
                    }
                    NonNoteKind::Lyric { verse, .. } => {
                        layout.verses = layout.verses.max(*verse);
                    }
                    NonNoteKind::Slur { duration } => {
                        let (em, eo) = layout.locate(mi, obj.offset, *duration);
                        *layout.slur_closes.entry((em, eo, obj.voice)).or_default() += 1;
                    }
                    NonNoteKind::Ottava { kind, duration } => {
                        let (em, eo) = layout.locate(mi, obj.offset, *duration);
                        layout.ottava_ends.entry((em, eo)).or_default().push(*kind);
                    }
                    _ => {}
                }
            }
        }
        layout
    }

    /// Maps an absolute span endpoint back to (measure, local offset).
    fn locate(&self, measure: usize, offset: Offset, duration: Offset) -> (usize, Offset) {
        let end_abs = self.starts[measure] + offset + duration;
        let mut j = self.starts.len().saturating_sub(2);
        for (idx, start) in self.starts.iter().enumerate().rev().skip(1) {
            if *start <= end_abs {
                j = idx;
                break;
            }
        }
        (j, end_abs - self.starts[j])
    }
}

fn measure_content_span(m: &Measure) -> Offset {
    let mut span = Offset::ZERO;
    for n in &m.notes {
        span = span.max(n.offset + n.duration);
    }
    for r in &m.rests {
        span = span.max(r.offset + r.duration);
    }
    span
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Kern(usize),
    Dynam,
    Text(u32),
}

struct Writer<'a> {
    score: &'a Score,
    layouts: Vec<PartLayout>,
    kern_columns: Vec<usize>,
    lines: Vec<String>,
}

impl<'a> Writer<'a> {
    fn columns(&self) -> Vec<(usize, ColKind)> {
        let mut cols = Vec::new();
        for (p, layout) in self.layouts.iter().enumerate() {
            for v in 0..self.kern_columns[p] {
                cols.push((p, ColKind::Kern(v)));
            }
            if layout.has_dynam {
                cols.push((p, ColKind::Dynam));
            }
            for verse in 1..=layout.verses {
                cols.push((p, ColKind::Text(verse)));
            }
        }
        cols
    }

    fn emit_cells(&mut self, cells: Vec<String>) {
        self.lines.push(cells.join("\t"));
    }

    /// One record with the same token in kern/dynam/text columns.
    fn emit_uniform(&mut self, kern: &str, dynam: &str, text: &str) {
        let cells: Vec<String> = self
            .columns()
            .iter()
            .map(|(_, kind)| match kind {
                ColKind::Kern(_) => kern.to_string(),
                ColKind::Dynam => dynam.to_string(),
                ColKind::Text(_) => text.to_string(),
            })
            .collect();
        self.emit_cells(cells);
    }

    /// Record with `token` in the chosen cell and `fill` elsewhere.
    fn emit_single(&mut self, part: usize, kind: ColKind, token: &str, fill: &str) {
        let cells: Vec<String> = self
            .columns()
            .iter()
            .map(|(p, k)| {
                if *p == part && *k == kind {
                    token.to_string()
                } else {
                    fill.to_string()
                }
            })
            .collect();
        self.emit_cells(cells);
    }

    /// Record with one token per part (on its first kern column).
    fn emit_per_part(&mut self, tokens: &BTreeMap<usize, String>, fill: &str) {
        let cells: Vec<String> = self
            .columns()
            .iter()
            .map(|(p, k)| match (tokens.get(p), k) {
                (Some(tok), ColKind::Kern(0)) => tok.clone(),
                _ => fill.to_string(),
            })
            .collect();
        self.emit_cells(cells);
    }

    fn emit_header(&mut self) {
        let cells: Vec<String> = self
            .columns()
            .iter()
            .map(|(_, kind)| {
                match kind {
                    ColKind::Kern(_) => "**kern",
                    ColKind::Dynam => "**dynam",
                    ColKind::Text(_) => "**text",
                }
                .to_string()
            })
            .collect();
        self.emit_cells(cells);

        if !self.score.staff_groups.is_empty() {
            let mut markers: BTreeMap<usize, String> = BTreeMap::new();
            for (gi, group) in self.score.staff_groups.iter().enumerate() {
                for &member in &group.member_parts {
                    markers.insert(member, format!("*part{}", gi + 1));
                }
            }
            self.emit_per_part(&markers, "*");
        }

        // opening clef/key/meter go before the first barline
        self.emit_interps_at(0, Offset::ZERO);
    }

    /// Clef, key signature and time signature records for objects at the
    /// given measure/offset, across all parts.
    fn emit_interps_at(&mut self, measure: usize, offset: Offset) {
        #[derive(Default)]
        struct Found {
            clefs: Vec<String>,
            keys: Vec<String>,
            numerics: Vec<String>,
            mets: Vec<String>,
        }
        let mut found: BTreeMap<usize, Found> = BTreeMap::new();
        for (p, part) in self.score.parts.iter().enumerate() {
            let Some(m) = part.measures.get(measure) else {
                continue;
            };
            for obj in &m.non_notes {
                if obj.offset != offset {
                    continue;
                }
                let entry = found.entry(p).or_default();
                match &obj.kind {
                    NonNoteKind::Clef(c) => {
                        let shape = match c.shape {
                            crate::model::ClefShape::G => "G",
                            crate::model::ClefShape::F => "F",
                            crate::model::ClefShape::C => "C",
                            crate::model::ClefShape::Percussion => "X",
                        };
                        let marks = if c.octave_shift < 0 {
                            "v".repeat(c.octave_shift.unsigned_abs() as usize)
                        } else {
                            "^".repeat(c.octave_shift as usize)
                        };
                        let line = if c.shape == crate::model::ClefShape::Percussion && c.line == 0
                        {
                            String::new()
                        } else {
                            c.line.to_string()
                        };
                        entry.clefs.push(format!("*clef{shape}{marks}{line}"));
                    }
                    NonNoteKind::KeySignature(k) => {
                        let body: String = if k.accidentals >= 0 {
                            ["f#", "c#", "g#", "d#", "a#", "e#", "b#"]
                                .iter()
                                .take(k.accidentals as usize)
                                .copied()
                                .collect()
                        } else {
                            ["b-", "e-", "a-", "d-", "g-", "c-", "f-"]
                                .iter()
                                .take(k.accidentals.unsigned_abs() as usize)
                                .copied()
                                .collect()
                        };
                        entry.keys.push(format!("*k[{body}]"));
                    }
                    NonNoteKind::TimeSignature(t) => {
                        if let (Some(top), Some(bottom)) = (t.top, t.bottom) {
                            entry.numerics.push(format!("*M{top}/{bottom}"));
                        }
                        match t.symbol {
                            TimeSymbol::Common => entry.mets.push("*met(c)".to_string()),
                            TimeSymbol::Cut => entry.mets.push("*met(c|)".to_string()),
                            TimeSymbol::None => {}
                        }
                    }
                    _ => {}
                }
            }
        }
        for field in [
            |f: &Found| f.clefs.clone(),
            |f: &Found| f.keys.clone(),
            |f: &Found| f.numerics.clone(),
            |f: &Found| f.mets.clone(),
        ] {
            let mut layer = 0usize;
            loop {
                let mut tokens: BTreeMap<usize, String> = BTreeMap::new();
                for (p, f) in &found {
                    if let Some(tok) = field(f).get(layer) {
                        tokens.insert(*p, tok.clone());
                    }
                }
                if tokens.is_empty() {
                    break;
                }
                self.emit_per_part(&tokens, "*");
                layer += 1;
            }
        }
    }

    fn emit_measure(&mut self, index: usize) -> Result<(), WriteError> {
        // collapse voices when the upcoming measure needs voices that do
        // not start at offset zero (their columns must be recreated at the
        // right clock); otherwise columns stay alive across the barline
        for p in 0..self.score.parts.len() {
            let needs_reset = self
                .voice_first_offsets(p, index)
                .iter()
                .any(|(v, o)| *v > 0 && *v < self.kern_columns[p] && !o.is_zero());
            if needs_reset {
                while self.kern_columns[p] > 1 {
                    let template = vec![String::new(); self.columns().len()];
                    let cells = mark_last_two_kern(template, &self.columns(), p);
                    self.emit_cells(cells);
                    self.kern_columns[p] -= 1;
                }
            }
        }

        // barlines separate measures; a leading barline is only needed when
        // the first measure carries no events to anchor it
        let needs_leading_bar = index == 0
            && self.score.parts.iter().all(|p| {
                p.measures
                    .first()
                    .map(|m| m.notes.is_empty() && m.rests.is_empty())
                    .unwrap_or(true)
            });
        if index > 0 || needs_leading_bar {
            let bar = format!("={}", index + 1);
            self.emit_uniform(&bar, &bar, &bar);
        }

        let grid = self.measure_grid(index);
        for offset in grid {
            if !(index == 0 && offset.is_zero()) {
                self.emit_interps_at(index, offset);
            }
            self.emit_ottava_records(index, offset);
            self.emit_direction_records(index, offset);
            self.ensure_columns(index, offset);
            self.emit_data_record(index, offset)?;
        }
        Ok(())
    }

    /// First event offset per voice in a measure.
    fn voice_first_offsets(&self, part: usize, measure: usize) -> BTreeMap<usize, Offset> {
        let mut map: BTreeMap<usize, Offset> = BTreeMap::new();
        let Some(m) = self.score.parts[part].measures.get(measure) else {
            return map;
        };
        for n in &m.notes {
            map.entry(n.voice)
                .and_modify(|o| *o = (*o).min(n.offset))
                .or_insert(n.offset);
        }
        for r in &m.rests {
            map.entry(r.voice)
                .and_modify(|o| *o = (*o).min(r.offset))
                .or_insert(r.offset);
        }
        map
    }

    /// Emits `*^` records when voices first sound at this offset.
    fn ensure_columns(&mut self, measure: usize, offset: Offset) {
        for p in 0..self.score.parts.len() {
            let firsts = self.voice_first_offsets(p, measure);
            let needed = firsts
                .iter()
                .filter(|(_, o)| **o <= offset)
                .map(|(v, _)| *v + 1)
                .max()
                .unwrap_or(0);
            while self.kern_columns[p] < needed {
                let split_at = self.kern_columns[p] - 1;
                self.emit_single(p, ColKind::Kern(split_at), "*^", "*");
                self.kern_columns[p] += 1;
            }
        }
    }

    fn emit_ottava_records(&mut self, measure: usize, offset: Offset) {
        // ends first: the bracket closes before anything new starts here
        let mut ends: BTreeMap<usize, String> = BTreeMap::new();
        for (p, layout) in self.layouts.iter().enumerate() {
            if let Some(kinds) = layout.ottava_ends.get(&(measure, offset)) {
                if let Some(kind) = kinds.first() {
                    ends.insert(p, format!("*X{}", kind.label()));
                }
            }
        }
        if !ends.is_empty() {
            self.emit_per_part(&ends, "*");
        }
        let mut starts: BTreeMap<usize, String> = BTreeMap::new();
        for (p, part) in self.score.parts.iter().enumerate() {
            let Some(m) = part.measures.get(measure) else {
                continue;
            };
            for obj in &m.non_notes {
                if obj.offset == offset {
                    if let NonNoteKind::Ottava { kind, .. } = &obj.kind {
                        starts.insert(p, format!("*{}", kind.label()));
                    }
                }
            }
        }
        if !starts.is_empty() {
            self.emit_per_part(&starts, "*");
        }
    }

    fn emit_direction_records(&mut self, measure: usize, offset: Offset) {
        let mut records: Vec<(usize, usize, String)> = Vec::new();
        for (p, part) in self.score.parts.iter().enumerate() {
            let Some(m) = part.measures.get(measure) else {
                continue;
            };
            for obj in &m.non_notes {
                if obj.offset == offset {
                    if let NonNoteKind::Direction { text } = &obj.kind {
                        records.push((p, obj.voice, text.clone()));
                    }
                }
            }
        }
        for (p, voice, text) in records {
            let voice = voice.min(self.kern_columns[p].saturating_sub(1));
            let safe = text.replace(':', "&colon;");
            self.emit_single(p, ColKind::Kern(voice), &format!("!LO:TX:t={safe}"), "!");
        }
    }

    /// All grid offsets of one measure across parts: event onsets, non-note
    /// anchors, and span endpoints that land inside this measure.
    fn measure_grid(&self, index: usize) -> Vec<Offset> {
        let mut grid: BTreeSet<Offset> = BTreeSet::new();
        for (p, part) in self.score.parts.iter().enumerate() {
            let Some(m) = part.measures.get(index) else {
                continue;
            };
            for n in &m.notes {
                grid.insert(n.offset);
            }
            for r in &m.rests {
                grid.insert(r.offset);
            }
            for o in &m.non_notes {
                grid.insert(o.offset);
            }
            let layout = &self.layouts[p];
            for ((em, eo), _) in layout.hairpin_ends.range((index, Offset::ZERO)..) {
                if *em != index {
                    break;
                }
                grid.insert(*eo);
            }
            for ((em, eo), _) in layout.ottava_ends.range((index, Offset::ZERO)..) {
                if *em != index {
                    break;
                }
                grid.insert(*eo);
            }
            for ((em, eo, _), _) in layout
                .slur_closes
                .range((index, Offset::ZERO, 0usize)..)
            {
                if *em != index {
                    break;
                }
                grid.insert(*eo);
            }
        }
        if grid.is_empty() {
            // an empty measure still needs nothing; no records
            return Vec::new();
        }
        grid.into_iter().collect()
    }

    fn emit_data_record(&mut self, measure: usize, offset: Offset) -> Result<(), WriteError> {
        let columns = self.columns();
        let mut main: Vec<String> = Vec::with_capacity(columns.len());
        // second and later dynamics/lyrics at one anchor spill into extra
        // records of their own, emitted before the main record so they keep
        // the same reference offset
        let mut extras: Vec<(usize, Vec<String>)> = Vec::new();

        for (ci, (p, kind)) in columns.iter().enumerate() {
            let m = self.score.parts[*p].measures.get(measure);
            let cell = match kind {
                ColKind::Kern(v) => {
                    let (cell, grace_tokens) = self.kern_cell(*p, m, measure, offset, *v)?;
                    if !grace_tokens.is_empty() {
                        extras.push((ci, grace_tokens));
                    }
                    cell
                }
                ColKind::Dynam => {
                    let (first, rest) = self.dynam_cells(*p, m, measure, offset);
                    if !rest.is_empty() {
                        extras.push((ci, rest));
                    }
                    first
                }
                ColKind::Text(verse) => {
                    let mut syllables: Vec<String> = m
                        .map(|m| {
                            m.non_notes
                                .iter()
                                .filter_map(|o| match &o.kind {
                                    NonNoteKind::Lyric { syllable, verse: v }
                                        if o.offset == offset && v == verse =>
                                    {
                                        Some(syllable.clone())
                                    }
                                    _ => None,
                                })
                                .collect()
                        })
                        .unwrap_or_default();
                    let first = if syllables.is_empty() {
                        ".".to_string()
                    } else {
                        syllables.remove(0)
                    };
                    if !syllables.is_empty() {
                        extras.push((ci, syllables));
                    }
                    first
                }
            };
            main.push(cell);
        }

        let depth = extras.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
        for layer in 0..depth {
            let mut row: Vec<String> = vec![".".to_string(); columns.len()];
            let mut any = false;
            for (ci, toks) in &extras {
                if let Some(t) = toks.get(layer) {
                    row[*ci] = t.clone();
                    any = true;
                }
            }
            if any {
                self.emit_cells(row);
            }
        }
        if main.iter().any(|c| c != ".") {
            self.emit_cells(main);
        }
        Ok(())
    }

    /// The data cell for one voice at one offset, plus separate tokens for
    /// grace notes at the same position (grace notes take no time, so they
    /// need records of their own before the sounding event).
    fn kern_cell(
        &self,
        p: usize,
        m: Option<&Measure>,
        measure: usize,
        offset: Offset,
        voice: usize,
    ) -> Result<(String, Vec<String>), WriteError> {
        let Some(m) = m else {
            return Ok((".".to_string(), Vec::new()));
        };
        let (grace_notes, notes): (Vec<&NoteEvent>, Vec<&NoteEvent>) = m
            .notes
            .iter()
            .filter(|n| n.offset == offset && n.voice == voice)
            .partition(|n| n.grace != crate::model::Grace::None);
        let rest = m
            .rests
            .iter()
            .find(|r| r.offset == offset && r.voice == voice);
        if !notes.is_empty() && rest.is_some() {
            return Err(WriteError::VoiceCollision { part: p, measure });
        }
        let closes = *self.layouts[p]
            .slur_closes
            .get(&(measure, offset, voice))
            .unwrap_or(&0);
        let opens = m
            .non_notes
            .iter()
            .filter(|o| {
                o.offset == offset && o.voice == voice && matches!(o.kind, NonNoteKind::Slur { .. })
            })
            .count();
        // slur marks ride the sounding cell; with only grace notes here they
        // attach to the first grace token instead
        let marks_on_grace = notes.is_empty() && rest.is_none() && !grace_notes.is_empty();
        let grace_tokens: Vec<String> = grace_notes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let first = i == 0 && marks_on_grace;
                self.note_subtoken(
                    n,
                    p,
                    measure,
                    false,
                    false,
                    if first { opens as u8 } else { 0 },
                    if first { closes as u8 } else { 0 },
                )
            })
            .collect::<Result<_, _>>()?;
        if let Some(r) = rest {
            let (recip, _) = recip_for(r.duration, r.dots, p, measure)?;
            let pn = ParsedNote {
                recip: Some(recip),
                dots: r.dots,
                rest: true,
                slur_opens: opens as u8,
                slur_closes: closes as u8,
                ..ParsedNote::default()
            };
            return Ok((super::cell::render_subtoken(&pn), grace_tokens));
        }
        if notes.is_empty() {
            return Ok((".".to_string(), grace_tokens));
        }
        let (open_beam, close_beam) = self.beam_marks(m, offset, voice);
        let mut subs = Vec::new();
        for (i, n) in notes.iter().enumerate() {
            let first = i == 0 && !marks_on_grace;
            subs.push(self.note_subtoken(
                n,
                p,
                measure,
                i == 0 && open_beam,
                i == 0 && close_beam,
                if first { opens as u8 } else { 0 },
                if first { closes as u8 } else { 0 },
            )?);
        }
        Ok((subs.join(" "), grace_tokens))
    }

    #[allow(clippy::too_many_arguments)]
    fn note_subtoken(
        &self,
        n: &NoteEvent,
        p: usize,
        measure: usize,
        open_beam: bool,
        close_beam: bool,
        slur_opens: u8,
        slur_closes: u8,
    ) -> Result<String, WriteError> {
        let recip = if n.duration.is_zero() && n.grace != crate::model::Grace::None {
            None
        } else {
            Some(recip_for(n.duration, n.dots, p, measure)?.0)
        };
        let pn = ParsedNote {
            recip,
            dots: n.dots,
            rest: false,
            pitch: Some(n.pitch),
            accidental: n.accidental,
            tie_begin: n.tie_to_next && !n.tie_from_prev,
            tie_end: n.tie_from_prev && !n.tie_to_next,
            tie_continue: n.tie_to_next && n.tie_from_prev,
            articulations: n.articulations.clone(),
            ornaments: n.ornaments.clone(),
            grace_marks: match n.grace {
                crate::model::Grace::None => 0,
                crate::model::Grace::Slashed => 1,
                crate::model::Grace::Plain => 2,
            },
            slur_opens,
            slur_closes,
            beam_opens: open_beam as u8,
            beam_closes: close_beam as u8,
        };
        Ok(super::cell::render_subtoken(&pn))
    }

    /// Whether the chord at (offset, voice) opens and/or closes a beam run.
    /// Runs are maximal sequences of consecutive beamed chords in one voice.
    fn beam_marks(&self, m: &Measure, offset: Offset, voice: usize) -> (bool, bool) {
        let mut onsets: Vec<(Offset, bool)> = Vec::new();
        let mut seen: BTreeSet<Offset> = BTreeSet::new();
        for n in m.notes.iter().filter(|n| n.voice == voice) {
            if seen.insert(n.offset) {
                let beamed = m
                    .notes
                    .iter()
                    .filter(|x| x.voice == voice && x.offset == n.offset)
                    .any(|x| x.flags_beams.contains(&FlagBeam::Beam));
                onsets.push((n.offset, beamed));
            }
        }
        for r in m.rests.iter().filter(|r| r.voice == voice) {
            if seen.insert(r.offset) {
                onsets.push((r.offset, false));
            }
        }
        onsets.sort();
        let Some(idx) = onsets.iter().position(|(o, _)| *o == offset) else {
            return (false, false);
        };
        if !onsets[idx].1 {
            return (false, false);
        }
        let first = idx == 0 || !onsets[idx - 1].1;
        let last = idx + 1 == onsets.len() || !onsets[idx + 1].1;
        (first, last)
    }

    /// Dynam cell tokens at an anchor: combined ends/starts/mark first, any
    /// further marks as overflow cells.
    fn dynam_cells(
        &self,
        p: usize,
        m: Option<&Measure>,
        measure: usize,
        offset: Offset,
    ) -> (String, Vec<String>) {
        let mut combo = String::new();
        for dir in self.layouts[p]
            .hairpin_ends
            .get(&(measure, offset))
            .into_iter()
            .flatten()
        {
            combo.push(match dir {
                HairpinDirection::Crescendo => '[',
                HairpinDirection::Decrescendo => ']',
            });
        }
        let mut marks: Vec<String> = Vec::new();
        if let Some(m) = m {
            for obj in &m.non_notes {
                if obj.offset != offset {
                    continue;
                }
                match &obj.kind {
                    NonNoteKind::Dynamic(DynamicKind::Hairpin { direction, .. }) => {
                        combo.push(match direction {
                            HairpinDirection::Crescendo => '<',
                            HairpinDirection::Decrescendo => '>',
                        });
                    }
                    NonNoteKind::Dynamic(DynamicKind::Mark(text)) => marks.push(text.clone()),
                    _ => {}
                }
            }
        }
        if !marks.is_empty() {
            combo.push_str(&marks.remove(0));
        }
        if combo.is_empty() {
            combo.push('.');
        }
        (combo, marks)
    }
}

fn mark_last_two_kern(
    mut cells: Vec<String>,
    columns: &[(usize, ColKind)],
    part: usize,
) -> Vec<String> {
    let kern_positions: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, (p, k))| *p == part && matches!(k, ColKind::Kern(_)))
        .map(|(i, _)| i)
        .collect();
    if kern_positions.len() >= 2 {
        let a = kern_positions[kern_positions.len() - 2];
        let b = kern_positions[kern_positions.len() - 1];
        for (i, cell) in cells.iter_mut().enumerate() {
            *cell = if i == a || i == b {
                "*v".to_string()
            } else {
                "*".to_string()
            };
        }
    }
    cells
}

/// Reciprocal duration digits for a sounding duration and dot count.
fn recip_for(
    duration: Offset,
    dots: u8,
    part: usize,
    measure: usize,
) -> Result<(u32, u8), WriteError> {
    let unsupported = || WriteError::UnsupportedDuration {
        part,
        measure,
        duration: duration.to_string(),
    };
    if duration.is_zero() {
        return Err(unsupported());
    }
    // invert the dot factor, then recip = 4 / base
    let factor_num = (1i64 << (dots as u32 + 1)) - 1;
    let factor_den = 1i64 << dots as u32;
    // base = duration * factor_den / factor_num
    let num = duration.numer() * factor_den;
    let den = duration.denom() * factor_num;
    // recip = 4 * den / num, must be a positive integer
    if num <= 0 {
        return Err(unsupported());
    }
    let recip_num = 4 * den;
    if recip_num % num != 0 {
        return Err(unsupported());
    }
    let recip = recip_num / num;
    if recip < 1 || recip > super::cell::MAX_RECIP as i64 {
        return Err(unsupported());
    }
    Ok((recip as u32, dots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HeadType, Pitch, Step};

    #[test]
    fn recip_inversion() {
        assert_eq!(recip_for(Offset::from_int(1), 0, 0, 0).unwrap().0, 4);
        assert_eq!(recip_for(Offset::new(3, 2), 1, 0, 0).unwrap().0, 4);
        assert_eq!(recip_for(Offset::new(1, 3), 0, 0, 0).unwrap().0, 12);
        assert_eq!(recip_for(Offset::from_int(4), 0, 0, 0).unwrap().0, 1);
        assert!(recip_for(Offset::new(5, 7), 0, 0, 0).is_err());
    }

    #[test]
    fn writes_a_minimal_score() {
        let mut measure = Measure::new(0);
        measure.notes.push(NoteEvent::plain(
            Offset::ZERO,
            Pitch::new(Step::C, 4),
            HeadType::Quarter,
            Offset::from_int(1),
        ));
        let score = Score {
            parts: vec![Part {
                id: 0,
                measures: vec![measure],
            }],
            staff_groups: vec![],
            source_warnings: vec![],
        };
        let text = write_kern(&score).unwrap();
        assert_eq!(text, "**kern\n4c\n*-\n");
    }

    #[test]
    fn empty_score_writes_nothing() {
        assert_eq!(write_kern(&Score::new()).unwrap(), "");
    }
}

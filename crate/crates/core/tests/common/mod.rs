//! Shared test support: seeded random score generation and mutation.
//!
//! Generated scores stay inside the kern-serializable subset when asked
//! (`serializable: true`): gapless voices, reciprocal-expressible durations,
//! span endpoints anchored on event onsets. With `serializable: false` the
//! generator also produces objects the kern subset cannot encode
//! (arpeggios, chord symbols, endings), which the diff engine must still
//! handle.

#![allow(dead_code)]

use omrned::model::*;
use rand::prelude::*;
use rand::rngs::StdRng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_parts: usize,
    pub max_measures: usize,
    pub max_events_per_voice: usize,
    pub max_voices: usize,
    pub serializable: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_parts: 2,
            max_measures: 4,
            max_events_per_voice: 4,
            max_voices: 2,
            serializable: true,
        }
    }
}

const RECIPS: [u32; 7] = [1, 2, 4, 8, 16, 12, 6];
const MARKS: [&str; 7] = ["p", "pp", "f", "ff", "mf", "fp", "sfz"];
const SYLLABLES: [&str; 6] = ["la", "son", "beau", "hel-", "-lo", "ay"];

pub fn gen_score(rng: &mut StdRng, cfg: &GenConfig) -> Score {
    let part_count = rng.random_range(1..=cfg.max_parts);
    let measure_count = rng.random_range(0..=cfg.max_measures);
    let mut parts = Vec::new();
    for id in 0..part_count {
        let mut measures = Vec::new();
        for index in 0..measure_count {
            measures.push(gen_measure(rng, cfg, index));
        }
        parts.push(Part { id, measures });
    }
    let staff_groups = if part_count >= 2 && rng.random_bool(0.3) {
        vec![StaffGroup {
            member_parts: vec![0, 1],
        }]
    } else {
        Vec::new()
    };
    Score {
        parts,
        staff_groups,
        source_warnings: Vec::new(),
    }
}

fn recip_duration(recip: u32, dots: u8) -> Offset {
    let factor_num = (1i64 << (dots as u32 + 1)) - 1;
    let factor_den = 1i64 << dots as u32;
    Offset::new(4 * factor_num, recip as i64 * factor_den)
}

fn head_for(recip: u32) -> HeadType {
    let mut p = 1u32;
    while p * 2 <= recip {
        p *= 2;
    }
    match p {
        1 => HeadType::Whole,
        2 => HeadType::Half,
        _ => HeadType::Quarter,
    }
}

fn tails_for(recip: u32) -> usize {
    let mut p = 1u32;
    while p * 2 <= recip {
        p *= 2;
    }
    if p >= 8 {
        (p.trailing_zeros() - 2) as usize
    } else {
        0
    }
}

fn gen_measure(rng: &mut StdRng, cfg: &GenConfig, index: usize) -> Measure {
    let mut m = Measure::new(index);
    let voices = rng.random_range(1..=cfg.max_voices);
    for voice in 0..voices {
        let events = rng.random_range(0..=cfg.max_events_per_voice);
        let mut clock = Offset::ZERO;
        for _ in 0..events {
            let recip = RECIPS[rng.random_range(0..RECIPS.len())];
            let dots = if rng.random_bool(0.15) { 1 } else { 0 };
            let duration = recip_duration(recip, dots);
            if rng.random_bool(0.2) {
                m.rests.push(RestEvent {
                    offset: clock,
                    head: head_for(recip),
                    dots,
                    duration,
                    voice,
                });
                clock += duration;
                continue;
            }
            let chord = if rng.random_bool(0.15) { 2 } else { 1 };
            let beamed = tails_for(recip) > 0 && rng.random_bool(0.5);
            for _ in 0..chord {
                let grace = if rng.random_bool(0.08) {
                    if rng.random_bool(0.5) {
                        Grace::Slashed
                    } else {
                        Grace::Plain
                    }
                } else {
                    Grace::None
                };
                let (dur, head, tails, dots) = if grace == Grace::None {
                    (duration, head_for(recip), tails_for(recip), dots)
                } else {
                    (Offset::ZERO, HeadType::Quarter, 0, 0)
                };
                let mark = if beamed { FlagBeam::Beam } else { FlagBeam::Flag };
                let mut articulations = Vec::new();
                if rng.random_bool(0.2) {
                    articulations.push(
                        [
                            Articulation::Accent,
                            Articulation::Marcato,
                            Articulation::Staccatissimo,
                            Articulation::Staccato,
                            Articulation::Tenuto,
                        ][rng.random_range(0..5)],
                    );
                }
                articulations.sort();
                let mut ornaments = Vec::new();
                if rng.random_bool(0.12) {
                    ornaments.push(
                        [Ornament::Mordent, Ornament::Trill, Ornament::Turn]
                            [rng.random_range(0..3)],
                    );
                }
                ornaments.sort();
                m.notes.push(NoteEvent {
                    offset: clock,
                    pitch: Pitch::new(
                        [Step::C, Step::D, Step::E, Step::F, Step::G, Step::A, Step::B]
                            [rng.random_range(0..7)],
                        rng.random_range(3..=5),
                    ),
                    accidental: if rng.random_bool(0.2) {
                        Some(
                            [
                                Accidental::Flat,
                                Accidental::Sharp,
                                Accidental::Natural,
                                Accidental::DoubleSharp,
                                Accidental::DoubleFlat,
                            ][rng.random_range(0..5)],
                        )
                    } else {
                        None
                    },
                    tie_to_next: rng.random_bool(0.1),
                    tie_from_prev: rng.random_bool(0.1),
                    head,
                    flags_beams: vec![mark; tails],
                    dots,
                    articulations,
                    ornaments,
                    grace,
                    duration: dur,
                    voice,
                });
                // grace chords would need equal durations; keep one note
                if grace != Grace::None {
                    break;
                }
            }
            if !m.notes.iter().any(|n| n.offset == clock && n.voice == voice && n.duration == duration)
            {
                // the event degenerated to a grace note; do not advance
                continue;
            }
            clock += duration;
        }
    }

    // non-note objects anchored on onsets
    let onsets: Vec<(Offset, usize)> = {
        let mut v: Vec<(Offset, usize)> = m
            .notes
            .iter()
            .map(|n| (n.offset, n.voice))
            .chain(m.rests.iter().map(|r| (r.offset, r.voice)))
            .collect();
        v.sort();
        v.dedup();
        v
    };
    let voice0_onsets: Vec<Offset> = {
        let mut v: Vec<Offset> = onsets
            .iter()
            .filter(|(_, v)| *v == 0)
            .map(|(o, _)| *o)
            .collect();
        v.sort();
        v.dedup();
        v
    };

    if index == 0 || rng.random_bool(0.2) {
        if rng.random_bool(0.7) {
            m.non_notes.push(NonNoteObject::new(
                Offset::ZERO,
                NonNoteKind::TimeSignature(if rng.random_bool(0.8) {
                    TimeSignature::numeric(rng.random_range(1..=12), [2, 4, 8][rng.random_range(0..3)])
                } else {
                    TimeSignature::symbolic(if rng.random_bool(0.5) {
                        TimeSymbol::Common
                    } else {
                        TimeSymbol::Cut
                    })
                }),
            ));
        }
        if rng.random_bool(0.5) {
            m.non_notes.push(NonNoteObject::new(
                Offset::ZERO,
                NonNoteKind::Clef(Clef {
                    shape: [ClefShape::G, ClefShape::F, ClefShape::C][rng.random_range(0..3)],
                    line: rng.random_range(1..=4),
                    octave_shift: if rng.random_bool(0.15) { -1 } else { 0 },
                }),
            ));
        }
        if rng.random_bool(0.4) {
            m.non_notes.push(NonNoteObject::new(
                Offset::ZERO,
                NonNoteKind::KeySignature(KeySignature {
                    accidentals: rng.random_range(-4..=4),
                }),
            ));
        }
    }

    if !onsets.is_empty() {
        if rng.random_bool(0.3) {
            let (o, _) = onsets[rng.random_range(0..onsets.len())];
            m.non_notes.push(NonNoteObject::new(
                o,
                NonNoteKind::Dynamic(DynamicKind::Mark(
                    MARKS[rng.random_range(0..MARKS.len())].to_string(),
                )),
            ));
        }
        if rng.random_bool(0.25) {
            let a = rng.random_range(0..onsets.len());
            let b = rng.random_range(0..onsets.len());
            let (lo, hi) = (onsets[a.min(b)].0, onsets[a.max(b)].0);
            // zero-length wedges cannot be expressed in one dynam cell
            if hi > lo {
                m.non_notes.push(NonNoteObject::new(
                    lo,
                    NonNoteKind::Dynamic(DynamicKind::Hairpin {
                        direction: if rng.random_bool(0.5) {
                            HairpinDirection::Crescendo
                        } else {
                            HairpinDirection::Decrescendo
                        },
                        duration: hi - lo,
                    }),
                ));
            }
        }
        if rng.random_bool(0.35) {
            let (o, _) = onsets[rng.random_range(0..onsets.len())];
            m.non_notes.push(NonNoteObject::new(
                o,
                NonNoteKind::Lyric {
                    syllable: SYLLABLES[rng.random_range(0..SYLLABLES.len())].to_string(),
                    verse: rng.random_range(1..=2),
                },
            ));
        }
        // slur between two onsets of one voice
        if rng.random_bool(0.3) {
            let voices: Vec<usize> = {
                let mut v: Vec<usize> = onsets.iter().map(|(_, v)| *v).collect();
                v.sort();
                v.dedup();
                v
            };
            let voice = voices[rng.random_range(0..voices.len())];
            let vo: Vec<Offset> = onsets
                .iter()
                .filter(|(_, v)| *v == voice)
                .map(|(o, _)| *o)
                .collect();
            if vo.len() >= 2 {
                let a = rng.random_range(0..vo.len() - 1);
                let b = rng.random_range(a + 1..vo.len());
                let mut obj =
                    NonNoteObject::new(vo[a], NonNoteKind::Slur { duration: vo[b] - vo[a] });
                obj.voice = voice;
                m.non_notes.push(obj);
            }
        }
        if rng.random_bool(0.15) && voice0_onsets.len() >= 2 {
            // voice0_onsets is sorted and deduped, so a < b means a real span
            let a = rng.random_range(0..voice0_onsets.len() - 1);
            let b = rng.random_range(a + 1..voice0_onsets.len());
            m.non_notes.push(NonNoteObject::new(
                voice0_onsets[a],
                NonNoteKind::Ottava {
                    kind: [
                        OttavaKind::Up8,
                        OttavaKind::Down8,
                        OttavaKind::Up15,
                        OttavaKind::Down15,
                    ][rng.random_range(0..4)],
                    duration: voice0_onsets[b] - voice0_onsets[a],
                },
            ));
        }
        if rng.random_bool(0.2) {
            let (o, v) = onsets[rng.random_range(0..onsets.len())];
            let mut obj = NonNoteObject::new(
                o,
                NonNoteKind::Direction {
                    text: ["rit.", "cresc.", "dolce", "a tempo"][rng.random_range(0..4)]
                        .to_string(),
                },
            );
            obj.voice = v;
            m.non_notes.push(obj);
        }
    }

    if !cfg.serializable {
        if rng.random_bool(0.15) {
            let o = onsets.first().map(|(o, _)| *o).unwrap_or(Offset::ZERO);
            m.non_notes.push(NonNoteObject::new(
                o,
                NonNoteKind::Arpeggio {
                    kind: [
                        ArpeggioKind::Up,
                        ArpeggioKind::Down,
                        ArpeggioKind::Undirected,
                        ArpeggioKind::NonArpeggiate,
                    ][rng.random_range(0..4)],
                    spans_staves: rng.random_bool(0.3),
                },
            ));
        }
        if rng.random_bool(0.1) {
            m.non_notes
                .push(NonNoteObject::new(Offset::ZERO, NonNoteKind::ChordSymbol));
        }
        if rng.random_bool(0.1) {
            m.non_notes.push(NonNoteObject::new(
                Offset::ZERO,
                NonNoteKind::Ending {
                    name: ["1.", "2.", "fine"][rng.random_range(0..3)].to_string(),
                    measure_count: rng.random_range(1..=3),
                },
            ));
        }
    }

    normalize(&mut m);
    m
}

/// Same canonical in-measure ordering the parser produces.
pub fn normalize(m: &mut Measure) {
    m.notes.sort_by(|a, b| {
        (a.offset, a.voice, a.pitch.octave, a.pitch.step, a.accidental)
            .cmp(&(b.offset, b.voice, b.pitch.octave, b.pitch.step, b.accidental))
    });
    m.rests
        .sort_by(|a, b| (a.offset, a.voice, a.dots).cmp(&(b.offset, b.voice, b.dots)));
    m.non_notes
        .sort_by(|a, b| (a.offset, format!("{:?}", a.kind)).cmp(&(b.offset, format!("{:?}", b.kind))));
}

/// Applies 1..=k small random mutations, yielding a realistic prediction
/// for a reference score.
pub fn mutate_score(rng: &mut StdRng, score: &Score, max_mutations: usize) -> Score {
    let mut out = score.clone();
    let count = rng.random_range(1..=max_mutations.max(1));
    for _ in 0..count {
        mutate_once(rng, &mut out);
    }
    for part in &mut out.parts {
        for m in &mut part.measures {
            normalize(m);
        }
        for (i, m) in part.measures.iter_mut().enumerate() {
            m.index = i;
        }
    }
    out
}

fn mutate_once(rng: &mut StdRng, score: &mut Score) {
    if score.parts.is_empty() {
        return;
    }
    let pi = rng.random_range(0..score.parts.len());
    let part = &mut score.parts[pi];
    if part.measures.is_empty() {
        return;
    }
    let mi = rng.random_range(0..part.measures.len());
    match rng.random_range(0..8) {
        0 => {
            // change a pitch
            let m = &mut part.measures[mi];
            if let Some(n) = pick_note(rng, m) {
                n.pitch = Pitch::new(Step::G, n.pitch.octave);
            }
        }
        1 => {
            let m = &mut part.measures[mi];
            if let Some(n) = pick_note(rng, m) {
                n.accidental = match n.accidental {
                    None => Some(Accidental::Sharp),
                    Some(_) => None,
                };
            }
        }
        2 => {
            let m = &mut part.measures[mi];
            if let Some(n) = pick_note(rng, m) {
                n.dots = (n.dots + 1) % 2;
                // keep duration consistent with the visual fields
                n.duration = if n.grace == Grace::None {
                    let base = match n.head {
                        HeadType::Whole => Offset::from_int(4),
                        HeadType::Half => Offset::from_int(2),
                        HeadType::Quarter => {
                            let mut d = Offset::from_int(1);
                            for _ in 0..n.flags_beams.len() {
                                d = Offset::new(d.numer(), d.denom() * 2);
                            }
                            d
                        }
                    };
                    if n.dots == 1 {
                        base + Offset::new(base.numer(), base.denom() * 2)
                    } else {
                        base
                    }
                } else {
                    Offset::ZERO
                };
            }
        }
        3 => {
            let m = &mut part.measures[mi];
            if let Some(n) = pick_note(rng, m) {
                n.tie_to_next = !n.tie_to_next;
            }
        }
        4 => {
            // flip a flag into a beam or back
            let m = &mut part.measures[mi];
            if let Some(n) = pick_note(rng, m) {
                if !n.flags_beams.is_empty() {
                    let flipped = match n.flags_beams[0] {
                        FlagBeam::Flag => FlagBeam::Beam,
                        FlagBeam::Beam => FlagBeam::Flag,
                    };
                    let len = n.flags_beams.len();
                    n.flags_beams = vec![flipped; len];
                }
            }
        }
        5 => {
            // change the time signature top
            let m = &mut part.measures[mi];
            for obj in &mut m.non_notes {
                if let NonNoteKind::TimeSignature(t) = &mut obj.kind {
                    if let Some(top) = t.top {
                        t.top = Some(top % 12 + 1);
                    }
                    break;
                }
            }
        }
        6 => {
            // drop a whole measure
            if part.measures.len() > 1 {
                part.measures.remove(mi);
                for (i, m) in part.measures.iter_mut().enumerate() {
                    m.index = i;
                }
            }
        }
        _ => {
            // replace a note with a rest
            let m = &mut part.measures[mi];
            if !m.notes.is_empty() {
                let i = rng.random_range(0..m.notes.len());
                let n = m.notes.remove(i);
                m.rests.push(RestEvent {
                    offset: n.offset,
                    head: n.head,
                    dots: n.dots,
                    duration: n.duration,
                    voice: n.voice,
                });
            }
        }
    }
}

fn pick_note<'a>(rng: &mut StdRng, m: &'a mut Measure) -> Option<&'a mut NoteEvent> {
    if m.notes.is_empty() {
        return None;
    }
    let i = rng.random_range(0..m.notes.len());
    m.notes.get_mut(i)
}

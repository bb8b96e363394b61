//! Within-measure comparison: notes flattened across voices and chords,
//! paired only when they share spelled pitch and exact offset; rests paired
//! by offset and head type; non-note objects paired by offset and kind.
//! Everything unpaired is edited wholesale at its full symbol count.

use std::collections::BTreeMap;

use crate::model::{
    CategoryId, DynamicKind, Measure, NonNoteKind, NonNoteObject, NoteEvent, Offset, RestEvent,
    TimeSymbol,
};

use super::indel::string_indel_counts;
use super::{Cost, Edit, EditKind, Location};

/// How many candidates on one side still get the exact assignment search.
const EXACT_ASSIGNMENT_LIMIT: usize = 6;

#[derive(Clone, Copy)]
pub struct MeasureCtx {
    pub part: usize,
    pub measure: usize,
}

/// All edits turning the predicted measure into the reference measure.
/// Unfiltered: category exclusion is applied by the caller at emission.
pub fn diff_measure(
    pred: &Measure,
    reference: &Measure,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
) -> Vec<Edit> {
    let mut edits = Vec::new();
    diff_notes(pred, reference, pred_ctx, ref_ctx, &mut edits);
    diff_rests(pred, reference, pred_ctx, ref_ctx, &mut edits);
    diff_non_notes(pred, reference, pred_ctx, ref_ctx, &mut edits);
    edits
}

/// Sum of the edit counts per category; the DP alignment cost.
pub fn cost_of(edits: &[Edit]) -> Cost {
    let mut cost = Cost::zero();
    for e in edits {
        cost.add(e.category, e.count);
    }
    cost
}

fn note_location(ctx: MeasureCtx, n: &NoteEvent) -> Location {
    Location {
        part: ctx.part,
        measure: Some(ctx.measure),
        offset: Some(n.offset),
        object: format!("note {}", n.pitch),
    }
}

fn rest_location(ctx: MeasureCtx, r: &RestEvent) -> Location {
    Location {
        part: ctx.part,
        measure: Some(ctx.measure),
        offset: Some(r.offset),
        object: "rest".to_string(),
    }
}

fn object_location(ctx: MeasureCtx, o: &NonNoteObject) -> Location {
    Location {
        part: ctx.part,
        measure: Some(ctx.measure),
        offset: Some(o.offset),
        object: o.kind.category().name().to_string(),
    }
}

/// Emits one edit per nonzero category of the object's own symbol bag.
pub fn whole_object_edits<T: crate::model::CountSymbols>(
    kind: EditKind,
    object: &T,
    location: Location,
    edits: &mut Vec<Edit>,
) {
    for (cat, count) in object.count_symbols().iter_nonzero() {
        edits.push(Edit {
            kind,
            category: cat,
            count,
            location: location.clone(),
        });
    }
}

fn push_pair(
    cat: CategoryId,
    del: u64,
    ins: u64,
    pred_loc: &Location,
    ref_loc: &Location,
    edits: &mut Vec<Edit>,
) {
    if del > 0 {
        edits.push(Edit {
            kind: EditKind::Delete,
            category: cat,
            count: del,
            location: pred_loc.clone(),
        });
    }
    if ins > 0 {
        edits.push(Edit {
            kind: EditKind::Insert,
            category: cat,
            count: ins,
            location: ref_loc.clone(),
        });
    }
}

/// Field-level edits between two directly-compared notes (same pitch and
/// offset). A field differing on both sides costs a delete plus an insert;
/// a field present on one side only costs one edit.
fn note_field_edits(
    p: &NoteEvent,
    r: &NoteEvent,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
    edits: &mut Vec<Edit>,
) {
    let pl = note_location(pred_ctx, p);
    let rl = note_location(ref_ctx, r);
    match (p.accidental, r.accidental) {
        (Some(a), Some(b)) if a != b => push_pair(CategoryId::Accidental, 1, 1, &pl, &rl, edits),
        (Some(_), None) => push_pair(CategoryId::Accidental, 1, 0, &pl, &rl, edits),
        (None, Some(_)) => push_pair(CategoryId::Accidental, 0, 1, &pl, &rl, edits),
        _ => {}
    }
    match (p.tie_to_next, r.tie_to_next) {
        (true, false) => push_pair(CategoryId::Tie, 1, 0, &pl, &rl, edits),
        (false, true) => push_pair(CategoryId::Tie, 0, 1, &pl, &rl, edits),
        _ => {}
    }
    if p.head != r.head {
        push_pair(CategoryId::NoteHead, 1, 1, &pl, &rl, edits);
    }
    // flags/beams as a multiset over the marker kinds
    for marker in [crate::model::FlagBeam::Flag, crate::model::FlagBeam::Beam] {
        let np = p.flags_beams.iter().filter(|m| **m == marker).count() as u64;
        let nr = r.flags_beams.iter().filter(|m| **m == marker).count() as u64;
        if np > nr {
            push_pair(CategoryId::FlagsBeams, np - nr, 0, &pl, &rl, edits);
        } else if nr > np {
            push_pair(CategoryId::FlagsBeams, 0, nr - np, &pl, &rl, edits);
        }
    }
    let (dp, dr) = (p.dots as u64, r.dots as u64);
    if dp > dr {
        push_pair(CategoryId::Dots, dp - dr, 0, &pl, &rl, edits);
    } else if dr > dp {
        push_pair(CategoryId::Dots, 0, dr - dp, &pl, &rl, edits);
    }
    multiset_edits(
        CategoryId::Articulations,
        &p.articulations,
        &r.articulations,
        &pl,
        &rl,
        edits,
    );
    multiset_edits(CategoryId::Ornaments, &p.ornaments, &r.ornaments, &pl, &rl, edits);
    let (gp, gr) = (p.grace.symbol_count(), r.grace.symbol_count());
    if gp > gr {
        push_pair(CategoryId::Grace, gp - gr, 0, &pl, &rl, edits);
    } else if gr > gp {
        push_pair(CategoryId::Grace, 0, gr - gp, &pl, &rl, edits);
    }
}

fn multiset_edits<T: Ord + Copy>(
    cat: CategoryId,
    pred: &[T],
    reference: &[T],
    pl: &Location,
    rl: &Location,
    edits: &mut Vec<Edit>,
) {
    let mut counts: BTreeMap<T, (u64, u64)> = BTreeMap::new();
    for x in pred {
        counts.entry(*x).or_default().0 += 1;
    }
    for x in reference {
        counts.entry(*x).or_default().1 += 1;
    }
    let mut del = 0u64;
    let mut ins = 0u64;
    for (_, (np, nr)) in counts {
        if np > nr {
            del += np - nr;
        } else {
            ins += nr - np;
        }
    }
    push_pair(cat, del, ins, pl, rl, edits);
}

/// Deterministic sort key used for tie-breaking candidate pairings.
fn note_key(n: &NoteEvent) -> String {
    format!(
        "{}|{:?}|{:?}|{}|{}|{:?}|{:?}|{:?}|{:?}",
        n.pitch, n.accidental, n.head, n.flags_beams.len(), n.dots, n.articulations, n.ornaments,
        n.grace, n.tie_to_next
    )
}

fn diff_notes(
    pred: &Measure,
    reference: &Measure,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
    edits: &mut Vec<Edit>,
) {
    // group by the direct-comparison key: exact offset plus spelled pitch
    let mut groups: BTreeMap<(Offset, i32, crate::model::Step), (Vec<&NoteEvent>, Vec<&NoteEvent>)> =
        BTreeMap::new();
    for n in &pred.notes {
        groups
            .entry((n.offset, n.pitch.octave, n.pitch.step))
            .or_default()
            .0
            .push(n);
    }
    for n in &reference.notes {
        groups
            .entry((n.offset, n.pitch.octave, n.pitch.step))
            .or_default()
            .1
            .push(n);
    }
    for (_, (mut ps, mut rs)) in groups {
        ps.sort_by_key(|n| note_key(n));
        rs.sort_by_key(|n| note_key(n));
        let pairs = assign(&ps, &rs, |p, r| {
            let mut tmp = Vec::new();
            note_field_edits(p, r, pred_ctx, ref_ctx, &mut tmp);
            cost_of(&tmp)
        });
        let mut p_used = vec![false; ps.len()];
        let mut r_used = vec![false; rs.len()];
        for (pi, ri) in pairs {
            p_used[pi] = true;
            r_used[ri] = true;
            note_field_edits(ps[pi], rs[ri], pred_ctx, ref_ctx, edits);
        }
        for (pi, n) in ps.iter().enumerate() {
            if !p_used[pi] {
                whole_object_edits(EditKind::Delete, *n, note_location(pred_ctx, n), edits);
            }
        }
        for (ri, n) in rs.iter().enumerate() {
            if !r_used[ri] {
                whole_object_edits(EditKind::Insert, *n, note_location(ref_ctx, n), edits);
            }
        }
    }
}

/// Minimum-cost injective assignment between two small candidate groups.
/// Exact enumeration up to `EXACT_ASSIGNMENT_LIMIT`, greedy beyond. Ties are
/// resolved toward the lexicographically smallest (total, category-vector)
/// cost, then the smallest index mapping.
fn assign<T, F>(ps: &[T], rs: &[T], mut pair_cost: F) -> Vec<(usize, usize)>
where
    F: FnMut(&T, &T) -> Cost,
{
    if ps.is_empty() || rs.is_empty() {
        return Vec::new();
    }
    let k = ps.len().min(rs.len());
    if ps.len() == 1 && rs.len() == 1 {
        return vec![(0, 0)];
    }
    let costs: Vec<Vec<Cost>> = ps
        .iter()
        .map(|p| rs.iter().map(|r| pair_cost(p, r)).collect())
        .collect();
    if ps.len() <= EXACT_ASSIGNMENT_LIMIT && rs.len() <= EXACT_ASSIGNMENT_LIMIT {
        // enumerate injective maps of the smaller side into the larger
        let flip = ps.len() > rs.len();
        let (small, large) = if flip {
            (rs.len(), ps.len())
        } else {
            (ps.len(), rs.len())
        };
        let mut best: Option<(Cost, Vec<usize>)> = None;
        let mut chosen = vec![usize::MAX; small];
        let mut used = vec![false; large];
        enumerate_assignments(
            0,
            small,
            large,
            &mut chosen,
            &mut used,
            &mut |mapping| {
                let mut total = Cost::zero();
                for (i, &j) in mapping.iter().enumerate() {
                    let c = if flip { &costs[j][i] } else { &costs[i][j] };
                    total = total.plus(c);
                }
                let better = match &best {
                    None => true,
                    Some((bc, _)) => total < *bc,
                };
                if better {
                    best = Some((total, mapping.to_vec()));
                }
            },
        );
        let (_, mapping) = best.expect("nonempty assignment enumeration");
        return mapping
            .iter()
            .enumerate()
            .map(|(i, &j)| if flip { (j, i) } else { (i, j) })
            .collect();
    }
    // greedy in deterministic (sorted) order
    let mut used = vec![false; rs.len()];
    let mut out = Vec::new();
    for (pi, row) in costs.iter().enumerate() {
        if out.len() == k {
            break;
        }
        let mut best: Option<(usize, &Cost)> = None;
        for (ri, c) in row.iter().enumerate() {
            if used[ri] {
                continue;
            }
            if best.map(|(_, bc)| c < bc).unwrap_or(true) {
                best = Some((ri, c));
            }
        }
        if let Some((ri, _)) = best {
            used[ri] = true;
            out.push((pi, ri));
        }
    }
    out
}

fn enumerate_assignments(
    i: usize,
    small: usize,
    large: usize,
    chosen: &mut Vec<usize>,
    used: &mut Vec<bool>,
    visit: &mut impl FnMut(&[usize]),
) {
    if i == small {
        visit(chosen);
        return;
    }
    for j in 0..large {
        if used[j] {
            continue;
        }
        used[j] = true;
        chosen[i] = j;
        enumerate_assignments(i + 1, small, large, chosen, used, visit);
        used[j] = false;
    }
}

fn diff_rests(
    pred: &Measure,
    reference: &Measure,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
    edits: &mut Vec<Edit>,
) {
    let mut groups: BTreeMap<(Offset, crate::model::HeadType), (Vec<&RestEvent>, Vec<&RestEvent>)> =
        BTreeMap::new();
    for r in &pred.rests {
        groups.entry((r.offset, r.head)).or_default().0.push(r);
    }
    for r in &reference.rests {
        groups.entry((r.offset, r.head)).or_default().1.push(r);
    }
    for (_, (mut ps, mut rs)) in groups {
        ps.sort_by_key(|r| r.dots);
        rs.sort_by_key(|r| r.dots);
        let pairs = assign(&ps, &rs, |p, r| {
            let mut c = Cost::zero();
            let d = (p.dots as u64).abs_diff(r.dots as u64);
            c.add(CategoryId::Dots, d);
            c
        });
        let mut p_used = vec![false; ps.len()];
        let mut r_used = vec![false; rs.len()];
        for (pi, ri) in pairs {
            p_used[pi] = true;
            r_used[ri] = true;
            let (dp, dr) = (ps[pi].dots as u64, rs[ri].dots as u64);
            let pl = rest_location(pred_ctx, ps[pi]);
            let rl = rest_location(ref_ctx, rs[ri]);
            if dp > dr {
                push_pair(CategoryId::Dots, dp - dr, 0, &pl, &rl, edits);
            } else if dr > dp {
                push_pair(CategoryId::Dots, 0, dr - dp, &pl, &rl, edits);
            }
        }
        for (pi, r) in ps.iter().enumerate() {
            if !p_used[pi] {
                whole_object_edits(EditKind::Delete, *r, rest_location(pred_ctx, r), edits);
            }
        }
        for (ri, r) in rs.iter().enumerate() {
            if !r_used[ri] {
                whole_object_edits(EditKind::Insert, *r, rest_location(ref_ctx, r), edits);
            }
        }
    }
}

/// Discriminant used to pair non-note objects of the same kind.
fn kind_tag(kind: &NonNoteKind) -> u8 {
    match kind {
        NonNoteKind::Dynamic(_) => 0,
        NonNoteKind::Clef(_) => 1,
        NonNoteKind::KeySignature(_) => 2,
        NonNoteKind::TimeSignature(_) => 3,
        NonNoteKind::Slur { .. } => 4,
        NonNoteKind::Ottava { .. } => 5,
        NonNoteKind::Direction { .. } => 6,
        NonNoteKind::Arpeggio { .. } => 7,
        NonNoteKind::ChordSymbol => 8,
        NonNoteKind::Lyric { .. } => 9,
        NonNoteKind::Ending { .. } => 10,
    }
}

fn diff_non_notes(
    pred: &Measure,
    reference: &Measure,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
    edits: &mut Vec<Edit>,
) {
    let mut groups: BTreeMap<(Offset, u8), (Vec<&NonNoteObject>, Vec<&NonNoteObject>)> =
        BTreeMap::new();
    for o in &pred.non_notes {
        groups
            .entry((o.offset, kind_tag(&o.kind)))
            .or_default()
            .0
            .push(o);
    }
    for o in &reference.non_notes {
        groups
            .entry((o.offset, kind_tag(&o.kind)))
            .or_default()
            .1
            .push(o);
    }
    for (_, (mut ps, mut rs)) in groups {
        ps.sort_by_key(|o| format!("{:?}", o.kind));
        rs.sort_by_key(|o| format!("{:?}", o.kind));
        let pairs = assign(&ps, &rs, |p, r| {
            let mut tmp = Vec::new();
            object_field_edits(p, r, pred_ctx, ref_ctx, &mut tmp);
            cost_of(&tmp)
        });
        let mut p_used = vec![false; ps.len()];
        let mut r_used = vec![false; rs.len()];
        for (pi, ri) in pairs {
            p_used[pi] = true;
            r_used[ri] = true;
            object_field_edits(ps[pi], rs[ri], pred_ctx, ref_ctx, edits);
        }
        for (pi, o) in ps.iter().enumerate() {
            if !p_used[pi] {
                whole_object_edits(EditKind::Delete, *o, object_location(pred_ctx, o), edits);
            }
        }
        for (ri, o) in rs.iter().enumerate() {
            if !r_used[ri] {
                whole_object_edits(EditKind::Insert, *o, object_location(ref_ctx, o), edits);
            }
        }
    }
}

/// Field-wise comparison of two non-note objects of the same kind at the
/// same offset. Text payloads use character-level indel distance; every
/// other field costs a delete plus an insert when it differs on both sides.
fn object_field_edits(
    p: &NonNoteObject,
    r: &NonNoteObject,
    pred_ctx: MeasureCtx,
    ref_ctx: MeasureCtx,
    edits: &mut Vec<Edit>,
) {
    let pl = object_location(pred_ctx, p);
    let rl = object_location(ref_ctx, r);
    match (&p.kind, &r.kind) {
        (NonNoteKind::Dynamic(a), NonNoteKind::Dynamic(b)) => match (a, b) {
            (DynamicKind::Mark(x), DynamicKind::Mark(y)) => {
                if x != y {
                    push_pair(CategoryId::Dynamic, 1, 1, &pl, &rl, edits);
                }
            }
            (
                DynamicKind::Hairpin {
                    direction: d1,
                    duration: t1,
                },
                DynamicKind::Hairpin {
                    direction: d2,
                    duration: t2,
                },
            ) => {
                if d1 != d2 {
                    push_pair(CategoryId::Dynamic, 1, 1, &pl, &rl, edits);
                }
                if t1 != t2 {
                    push_pair(CategoryId::Dynamic, 1, 1, &pl, &rl, edits);
                }
            }
            (DynamicKind::Mark(_), DynamicKind::Hairpin { .. }) => {
                push_pair(CategoryId::Dynamic, 1, 2, &pl, &rl, edits);
            }
            (DynamicKind::Hairpin { .. }, DynamicKind::Mark(_)) => {
                push_pair(CategoryId::Dynamic, 2, 1, &pl, &rl, edits);
            }
        },
        (NonNoteKind::Clef(a), NonNoteKind::Clef(b)) => {
            if a != b {
                push_pair(CategoryId::Clef, 1, 1, &pl, &rl, edits);
            }
        }
        (NonNoteKind::KeySignature(a), NonNoteKind::KeySignature(b)) => {
            let (ka, kb) = (a.accidentals as i64, b.accidentals as i64);
            if (ka >= 0 && kb >= 0) || (ka <= 0 && kb <= 0) {
                let d = ka.abs_diff(kb);
                if ka.abs() > kb.abs() {
                    push_pair(CategoryId::KeySignature, d, 0, &pl, &rl, edits);
                } else if kb.abs() > ka.abs() {
                    push_pair(CategoryId::KeySignature, 0, d, &pl, &rl, edits);
                }
            } else {
                push_pair(
                    CategoryId::KeySignature,
                    ka.unsigned_abs(),
                    kb.unsigned_abs(),
                    &pl,
                    &rl,
                    edits,
                );
            }
        }
        (NonNoteKind::TimeSignature(a), NonNoteKind::TimeSignature(b)) => {
            let symbolic_a = a.symbol != TimeSymbol::None;
            let symbolic_b = b.symbol != TimeSymbol::None;
            match (symbolic_a, symbolic_b) {
                (true, true) => {
                    if a.symbol != b.symbol {
                        push_pair(CategoryId::TimeSignature, 1, 1, &pl, &rl, edits);
                    }
                }
                (false, false) => {
                    occupancy_pair(CategoryId::TimeSignature, a.top, b.top, &pl, &rl, edits);
                    occupancy_pair(CategoryId::TimeSignature, a.bottom, b.bottom, &pl, &rl, edits);
                }
                _ => {
                    // a numeric signature and a symbol are entirely different
                    // glyph sets
                    push_pair(
                        CategoryId::TimeSignature,
                        a.symbol_count(),
                        b.symbol_count(),
                        &pl,
                        &rl,
                        edits,
                    );
                }
            }
        }
        (NonNoteKind::Slur { duration: d1 }, NonNoteKind::Slur { duration: d2 }) => {
            if d1 != d2 {
                push_pair(CategoryId::Slur, 1, 1, &pl, &rl, edits);
            }
        }
        (
            NonNoteKind::Ottava {
                kind: k1,
                duration: d1,
            },
            NonNoteKind::Ottava {
                kind: k2,
                duration: d2,
            },
        ) => {
            if k1 != k2 {
                push_pair(CategoryId::Ottava, 1, 1, &pl, &rl, edits);
            }
            if d1 != d2 {
                push_pair(CategoryId::Ottava, 1, 1, &pl, &rl, edits);
            }
        }
        (NonNoteKind::Direction { text: t1 }, NonNoteKind::Direction { text: t2 }) => {
            let (del, ins) = string_indel_counts(t1, t2);
            push_pair(CategoryId::Direction, del, ins, &pl, &rl, edits);
        }
        (
            NonNoteKind::Arpeggio {
                kind: k1,
                spans_staves: s1,
            },
            NonNoteKind::Arpeggio {
                kind: k2,
                spans_staves: s2,
            },
        ) => {
            if k1 != k2 {
                push_pair(CategoryId::Arpeggio, 1, 1, &pl, &rl, edits);
            }
            match (s1, s2) {
                (true, false) => push_pair(CategoryId::Arpeggio, 1, 0, &pl, &rl, edits),
                (false, true) => push_pair(CategoryId::Arpeggio, 0, 1, &pl, &rl, edits),
                _ => {}
            }
        }
        (NonNoteKind::ChordSymbol, NonNoteKind::ChordSymbol) => {}
        (
            NonNoteKind::Lyric {
                syllable: s1,
                verse: v1,
            },
            NonNoteKind::Lyric {
                syllable: s2,
                verse: v2,
            },
        ) => {
            let (del, ins) = string_indel_counts(s1, s2);
            push_pair(CategoryId::Lyric, del, ins, &pl, &rl, edits);
            if v1 != v2 {
                push_pair(CategoryId::Lyric, 1, 1, &pl, &rl, edits);
            }
        }
        (
            NonNoteKind::Ending {
                name: n1,
                measure_count: c1,
            },
            NonNoteKind::Ending {
                name: n2,
                measure_count: c2,
            },
        ) => {
            let (del, ins) = string_indel_counts(n1, n2);
            push_pair(CategoryId::Ending, del, ins, &pl, &rl, edits);
            if c1 != c2 {
                push_pair(CategoryId::Ending, 1, 1, &pl, &rl, edits);
            }
        }
        _ => unreachable!("objects are paired within one kind"),
    }
}

fn occupancy_pair(
    cat: CategoryId,
    a: Option<u32>,
    b: Option<u32>,
    pl: &Location,
    rl: &Location,
    edits: &mut Vec<Edit>,
) {
    match (a, b) {
        (Some(x), Some(y)) if x != y => push_pair(cat, 1, 1, pl, rl, edits),
        (Some(_), None) => push_pair(cat, 1, 0, pl, rl, edits),
        (None, Some(_)) => push_pair(cat, 0, 1, pl, rl, edits),
        _ => {}
    }
}

//! Categorized insert/delete edit distance between two scores.
//!
//! Every difference is modeled as deletions of predicted symbols plus
//! insertions of reference symbols; there are no substitutions. Parts pair
//! by source order, measures align by dynamic programming over symbol cost,
//! and events within a measure pair only when they agree on the spec's
//! identity key (offset plus spelled pitch for notes).

mod align;
mod indel;
mod measure;

use std::fmt;

use crate::model::{CategoryId, CountSymbols, Offset, Score, SymbolBag, CATEGORY_COUNT};

pub use align::align_measures;
pub use indel::{lcs_len, string_indel_counts, string_indel_distance};
pub use measure::{diff_measure, MeasureCtx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EditKind {
    Insert,
    Delete,
}

/// Where an edit applies: deletions locate into the prediction, insertions
/// into the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub part: usize,
    pub measure: Option<usize>,
    pub offset: Option<Offset>,
    pub object: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "part {}", self.part)?;
        if let Some(m) = self.measure {
            write!(f, ", measure {m}")?;
        }
        if let Some(o) = self.offset {
            write!(f, ", offset {o}")?;
        }
        write!(f, ": {}", self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub kind: EditKind,
    pub category: CategoryId,
    pub count: u64,
    pub location: Location,
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EditKind::Insert => "insert",
            EditKind::Delete => "delete",
        };
        write!(f, "{kind} {} {} @ {}", self.count, self.category, self.location)
    }
}

pub type EditList = Vec<Edit>;

/// Composite alignment cost: total symbols first, then the per-category
/// distance vector. Lexicographic comparison is preserved by addition, so
/// dynamic programming over it stays optimal, and minimizing it pins the
/// category breakdown uniquely (making swap symmetry exact even on ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cost {
    pub total: u64,
    pub vector: [u64; CATEGORY_COUNT],
}

impl Cost {
    pub fn zero() -> Cost {
        Cost {
            total: 0,
            vector: [0; CATEGORY_COUNT],
        }
    }

    pub fn add(&mut self, cat: CategoryId, count: u64) {
        self.total += count;
        self.vector[cat as usize] += count;
    }

    pub fn plus(&self, other: &Cost) -> Cost {
        let mut out = *self;
        out.total += other.total;
        for (a, b) in out.vector.iter_mut().zip(other.vector.iter()) {
            *a += b;
        }
        out
    }
}

/// Options for `diff_scores`. Excluded categories contribute neither edits
/// nor symbol totals; alignment decisions are still made on the full
/// unfiltered costs so that exclusion never perturbs the remaining
/// categories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiffOptions {
    pub excluded: Vec<CategoryId>,
}

impl DiffOptions {
    pub fn excluding(cats: &[CategoryId]) -> DiffOptions {
        let mut excluded = cats.to_vec();
        excluded.sort();
        excluded.dedup();
        DiffOptions { excluded }
    }
}

/// Outcome of comparing a prediction against a reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffResult {
    pub edits: EditList,
    pub per_category: SymbolBag,
    pub insertions: u64,
    pub deletions: u64,
    pub n_pred: u64,
    pub n_ref: u64,
}

impl DiffResult {
    pub fn total_edits(&self) -> u64 {
        self.insertions + self.deletions
    }

    /// Line-oriented human-readable edit list.
    pub fn edits_human(&self) -> String {
        let mut out = String::new();
        for e in &self.edits {
            let kind = match e.kind {
                EditKind::Insert => "insert",
                EditKind::Delete => "delete",
            };
            out.push_str(&format!(
                "{kind} {count} {category} @ {location}\n",
                count = e.count,
                category = e.category,
                location = e.location
            ));
        }
        out
    }

    /// Machine-readable form: one tab-separated record per edit with kind,
    /// category, count, part, measure, offset and object description.
    pub fn edits_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edits {
            let kind = match e.kind {
                EditKind::Insert => "insert",
                EditKind::Delete => "delete",
            };
            let measure = e
                .location
                .measure
                .map(|m| m.to_string())
                .unwrap_or_else(|| "-".to_string());
            let offset = e
                .location
                .offset
                .map(|o| o.to_string())
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "{kind}\t{}\t{}\t{}\t{measure}\t{offset}\t{}\n",
                e.category, e.count, e.location.part, e.location.object
            ));
        }
        out
    }
}

/// Pairs parts by source order and produces whole-part and staff-group
/// edits for everything that cannot be paired.
pub fn align_parts(pred: &Score, reference: &Score) -> (Vec<(usize, usize)>, EditList) {
    let paired = pred.parts.len().min(reference.parts.len());
    let pairs: Vec<(usize, usize)> = (0..paired).map(|i| (i, i)).collect();
    let mut edits = Vec::new();
    for p in &pred.parts[paired..] {
        measure::whole_object_edits(
            EditKind::Delete,
            p,
            Location {
                part: p.id,
                measure: None,
                offset: None,
                object: "part".to_string(),
            },
            &mut edits,
        );
    }
    for p in &reference.parts[paired..] {
        measure::whole_object_edits(
            EditKind::Insert,
            p,
            Location {
                part: p.id,
                measure: None,
                offset: None,
                object: "part".to_string(),
            },
            &mut edits,
        );
    }
    // staff groups compare as sets of member spans
    for g in &pred.staff_groups {
        if !reference.staff_groups.iter().any(|h| h.member_parts == g.member_parts) {
            edits.push(Edit {
                kind: EditKind::Delete,
                category: CategoryId::StaffGroup,
                count: 1,
                location: Location {
                    part: g.member_parts.first().copied().unwrap_or(0),
                    measure: None,
                    offset: None,
                    object: format!("staff group {:?}", g.member_parts),
                },
            });
        }
    }
    for g in &reference.staff_groups {
        if !pred.staff_groups.iter().any(|h| h.member_parts == g.member_parts) {
            edits.push(Edit {
                kind: EditKind::Insert,
                category: CategoryId::StaffGroup,
                count: 1,
                location: Location {
                    part: g.member_parts.first().copied().unwrap_or(0),
                    measure: None,
                    offset: None,
                    object: format!("staff group {:?}", g.member_parts),
                },
            });
        }
    }
    (pairs, edits)
}

/// Computes the categorized edit list between a predicted score and a
/// reference score.
pub fn diff_scores(pred: &Score, reference: &Score, opts: &DiffOptions) -> DiffResult {
    let (pairs, mut edits) = align_parts(pred, reference);
    for (pi, ri) in pairs {
        let mut part_edits = align::align_measures(&pred.parts[pi], &reference.parts[ri]);
        edits.append(&mut part_edits);
    }

    if !opts.excluded.is_empty() {
        edits.retain(|e| !opts.excluded.contains(&e.category));
    }

    let mut per_category = SymbolBag::new();
    let mut insertions = 0u64;
    let mut deletions = 0u64;
    for e in &edits {
        per_category.add(e.category, e.count);
        match e.kind {
            EditKind::Insert => insertions += e.count,
            EditKind::Delete => deletions += e.count,
        }
    }

    DiffResult {
        edits,
        per_category,
        insertions,
        deletions,
        n_pred: pred.count_symbols().without(&opts.excluded).total(),
        n_ref: reference.count_symbols().without(&opts.excluded).total(),
    }
}

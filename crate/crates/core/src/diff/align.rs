//! Global measure-sequence alignment by dynamic programming.
//!
//! Substituting two measures costs their within-measure diff; deleting or
//! inserting a measure costs its full symbol total (the structural measure
//! symbol included). The DP minimizes the composite (total, category
//! vector) cost, which pins the category breakdown uniquely.

use crate::model::{CountSymbols, Measure, Part};

use super::measure::{cost_of, diff_measure, whole_object_edits, MeasureCtx};
use super::{Cost, EditKind, EditList, Location};

pub fn align_measures(pred: &Part, reference: &Part) -> EditList {
    let pm = &pred.measures;
    let rm = &reference.measures;
    let n = pm.len();
    let m = rm.len();

    let pred_ctx = |i: usize| MeasureCtx {
        part: pred.id,
        measure: i,
    };
    let ref_ctx = |j: usize| MeasureCtx {
        part: reference.id,
        measure: j,
    };

    let sub_edits = |i: usize, j: usize| diff_measure(&pm[i], &rm[j], pred_ctx(i), ref_ctx(j));
    let del_cost = |i: usize| bag_cost(&pm[i]);
    let ins_cost = |j: usize| bag_cost(&rm[j]);

    let mut dp = vec![vec![Cost::zero(); m + 1]; n + 1];
    for i in 1..=n {
        dp[i][0] = dp[i - 1][0].plus(&del_cost(i - 1));
    }
    for j in 1..=m {
        dp[0][j] = dp[0][j - 1].plus(&ins_cost(j - 1));
    }
    let mut sub_costs = vec![vec![Cost::zero(); m]; n];
    for i in 1..=n {
        for j in 1..=m {
            let sub = cost_of(&sub_edits(i - 1, j - 1));
            sub_costs[i - 1][j - 1] = sub;
            let via_sub = dp[i - 1][j - 1].plus(&sub);
            let via_del = dp[i - 1][j].plus(&del_cost(i - 1));
            let via_ins = dp[i][j - 1].plus(&ins_cost(j - 1));
            dp[i][j] = via_sub.min(via_del).min(via_ins);
        }
    }

    // traceback ties prefer substitution, then deletion, then insertion;
    // the composite cost already pins every counted quantity, so the tie
    // order only affects edit locations
    let mut steps: Vec<Step> = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1].plus(&sub_costs[i - 1][j - 1]) {
            steps.push(Step::Sub(i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[i][j] == dp[i - 1][j].plus(&del_cost(i - 1)) {
            steps.push(Step::Del(i - 1));
            i -= 1;
        } else {
            steps.push(Step::Ins(j - 1));
            j -= 1;
        }
    }
    steps.reverse();

    let mut edits = Vec::new();
    for step in steps {
        match step {
            Step::Sub(i, j) => edits.extend(sub_edits(i, j)),
            Step::Del(i) => whole_object_edits(
                EditKind::Delete,
                &pm[i],
                Location {
                    part: pred.id,
                    measure: Some(i),
                    offset: None,
                    object: "measure".to_string(),
                },
                &mut edits,
            ),
            Step::Ins(j) => whole_object_edits(
                EditKind::Insert,
                &rm[j],
                Location {
                    part: reference.id,
                    measure: Some(j),
                    offset: None,
                    object: "measure".to_string(),
                },
                &mut edits,
            ),
        }
    }
    edits
}

enum Step {
    Sub(usize, usize),
    Del(usize),
    Ins(usize),
}

fn bag_cost(m: &Measure) -> Cost {
    let mut cost = Cost::zero();
    for (cat, count) in m.count_symbols().iter_nonzero() {
        cost.add(cat, count);
    }
    cost
}

//! Insert/delete character distance for text payloads. Substitutions are
//! deliberately not allowed, consistent with how the metric models every
//! change as a delete plus an insert.

/// Length of the longest common subsequence of two char sequences.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ca in a {
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Minimal insert/delete edits turning `a` into `b`: |a| + |b| - 2*LCS.
pub fn string_indel_distance(a: &str, b: &str) -> u64 {
    let (d, i) = string_indel_counts(a, b);
    d + i
}

/// (deletions from `a`, insertions from `b`) of the minimal indel script.
pub fn string_indel_counts(a: &str, b: &str) -> (u64, u64) {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    let lcs = lcs_len(&av, &bv);
    ((av.len() - lcs) as u64, (bv.len() - lcs) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        assert_eq!(string_indel_distance("", "abc"), 3);
        assert_eq!(string_indel_distance("abc", ""), 3);
        assert_eq!(string_indel_distance("abc", "abc"), 0);
        assert_eq!(string_indel_distance("", ""), 0);
    }

    #[test]
    fn single_characters_cost_two() {
        // no substitutions: "2" -> "3" is a delete plus an insert
        assert_eq!(string_indel_distance("2", "3"), 2);
    }

    #[test]
    fn crescendo_example() {
        // delete ".", insert "e","n","d","o"
        assert_eq!(string_indel_distance("cresc.", "crescendo"), 5);
        assert_eq!(string_indel_counts("cresc.", "crescendo"), (1, 4));
    }

    #[test]
    fn unicode_is_char_based() {
        assert_eq!(string_indel_distance("naïve", "naive"), 2);
    }
}

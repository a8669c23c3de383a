//! Robust parsing of listwise ranking responses into permutations.

use crate::ranking::Permutation;

/// Extract a ranking like `[2] > [1] > [3]` into a valid permutation.
///
/// Identifiers are 1-based in the response text and 0-based in the result.
/// Repair rules, applied in order seen: out-of-range identifiers are
/// dropped, duplicates keep their first occurrence, and identifiers the
/// response never mentions are appended in original candidate order.
/// `repaired` is set whenever any rule fired, so the worst case (no
/// identifiers at all) is the identity permutation with `repaired = true`.
pub fn parse_permutation(response: &str, k: usize) -> Permutation {
    let mut order = Vec::with_capacity(k);
    let mut seen = vec![false; k];
    let mut repaired = false;

    let bytes = response.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'[' {
            i += 1;
            continue;
        }
        let start = i + 1;
        let mut end = start;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end == start || end >= bytes.len() || bytes[end] != b']' {
            i += 1;
            continue;
        }
        i = end + 1;
        // overflow counts as out of range
        let id: usize = match response[start..end].parse() {
            Ok(v) => v,
            Err(_) => {
                repaired = true;
                continue;
            }
        };
        if id == 0 || id > k {
            repaired = true;
            continue;
        }
        let idx = id - 1;
        if seen[idx] {
            repaired = true;
            continue;
        }
        seen[idx] = true;
        order.push(idx);
    }

    if order.len() < k {
        repaired = true;
        for (idx, was_seen) in seen.iter().enumerate() {
            if !was_seen {
                order.push(idx);
            }
        }
    }

    Permutation { order, repaired }
}

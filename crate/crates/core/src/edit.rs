//! Damerau-Levenshtein distance over token sequences.

use std::collections::HashMap;
use std::hash::Hash;

/// Edit distance with unit costs for insertion, deletion, substitution, and
/// transposition. This is the unrestricted form: transposed symbols may have
/// material inserted between them, so `ca -> abc` costs 2 (swap, then
/// insert), and the result is a true metric.
pub fn damerau_levenshtein<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let (la, lb) = (a.len(), b.len());
    if la == 0 {
        return lb;
    }
    if lb == 0 {
        return la;
    }
    let maxdist = la + lb;
    let width = lb + 2;
    // Row-major (la + 2) x (lb + 2) matrix with a sentinel border.
    let mut d = vec![0usize; (la + 2) * width];
    let at = |i: usize, j: usize| i * width + j;
    d[at(0, 0)] = maxdist;
    for i in 0..=la {
        d[at(i + 1, 0)] = maxdist;
        d[at(i + 1, 1)] = i;
    }
    for j in 0..=lb {
        d[at(0, j + 1)] = maxdist;
        d[at(1, j + 1)] = j;
    }
    // Last row where each symbol occurred in `a`, 1-indexed.
    let mut last_row: HashMap<&T, usize> = HashMap::new();
    for i in 1..=la {
        // Last column in this row where `b` matched `a`.
        let mut last_col = 0usize;
        for j in 1..=lb {
            let row = *last_row.get(&b[j - 1]).unwrap_or(&0);
            let col = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            let substitute = d[at(i, j)] + cost;
            let insert = d[at(i + 1, j)] + 1;
            let delete = d[at(i, j + 1)] + 1;
            let transpose = d[at(row, col)] + (i - row - 1) + 1 + (j - col - 1);
            d[at(i + 1, j + 1)] = substitute.min(insert).min(delete).min(transpose);
        }
        last_row.insert(&a[i - 1], i);
    }
    d[at(la + 1, lb + 1)]
}

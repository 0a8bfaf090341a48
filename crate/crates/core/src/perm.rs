//! Small permutation helpers shared across modules.

/// Advances `items` to the next lexicographic permutation. Returns `false`
/// (leaving the slice sorted ascending) after the last one.
pub fn next_permutation<T: Ord>(items: &mut [T]) -> bool {
    if items.len() < 2 {
        return false;
    }
    let mut i = items.len() - 1;
    while i > 0 && items[i - 1] >= items[i] {
        i -= 1;
    }
    if i == 0 {
        items.reverse();
        return false;
    }
    let mut j = items.len() - 1;
    while items[j] <= items[i - 1] {
        j -= 1;
    }
    items.swap(i - 1, j);
    items[i..].reverse();
    true
}

/// All permutations of `0..d` in lexicographic order.
pub fn all_permutations(d: usize) -> Vec<Vec<u8>> {
    let mut cur: Vec<u8> = (0..d as u8).collect();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

/// Lexicographic rank (Lehmer code) of a permutation of `0..d`.
pub fn rank(perm: &[u8]) -> usize {
    let d = perm.len();
    let mut r = 0;
    for i in 0..d {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        r = r * (d - i) + smaller;
    }
    r
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

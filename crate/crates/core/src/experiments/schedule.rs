/// Row of a balanced (Williams) Latin square. Even `n` needs `n` rows,
/// odd `n` needs `2n`; participants wrap around.
pub fn latin_square_row(n: usize, participant: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    // 0, 1, n-1, 2, n-2, ...
    let first: Vec<usize> = (0..n)
        .map(|j| {
            if j % 2 == 1 {
                j.div_ceil(2)
            } else {
                (n - j / 2) % n
            }
        })
        .collect();
    let rows = if n.is_multiple_of(2) { n } else { 2 * n };
    let r = participant % rows;
    let mut row: Vec<usize> = first.iter().map(|c| (c + r) % n).collect();
    if r >= n {
        row.reverse();
    }
    row
}

/// Condition order for one participant.
pub fn generate_condition_schedule<T: Clone>(conditions: &[T], participant: usize) -> Vec<T> {
    latin_square_row(conditions.len(), participant)
        .into_iter()
        .map(|i| conditions[i].clone())
        .collect()
}

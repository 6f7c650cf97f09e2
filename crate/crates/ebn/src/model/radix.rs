//! Mixed-radix indexing of joint discrete states. The first variable in
//! a scope is the most significant digit, so tables lay out identically
//! across implementations.

/// Number of joint configurations.
pub fn config_count(cards: &[usize]) -> usize {
    cards.iter().product()
}

/// Rank of a joint state.
pub fn config_index(cards: &[usize], states: &[usize]) -> usize {
    debug_assert_eq!(cards.len(), states.len());
    let mut idx = 0;
    for (c, s) in cards.iter().zip(states) {
        debug_assert!(s < c);
        idx = idx * c + s;
    }
    idx
}

/// Inverse of [`config_index`].
pub fn config_unrank(cards: &[usize], idx: usize) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    unrank_into(cards, idx, &mut out);
    out
}

/// Allocation-free [`config_unrank`].
pub fn unrank_into(cards: &[usize], mut idx: usize, out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = idx % cards[i];
        idx /= cards[i];
    }
}

/// Iterates all joint states in rank order.
pub fn configs(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total = config_count(cards);
    (0..total).map(move |i| config_unrank(cards, i))
}

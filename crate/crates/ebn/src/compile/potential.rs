//! Potentials: flat probability tables over ordered scopes of discrete
//! variables, in mixed-radix layout with the first scope variable most
//! significant. Conditional tables carry the child as the last axis.

use crate::model::radix;

/// A table over a scope of variables identified by dense indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

impl Potential {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, table: Vec<f64>) -> Self {
        assert_eq!(scope.len(), cards.len());
        assert_eq!(table.len(), radix::config_count(&cards));
        Potential {
            scope,
            cards,
            table,
        }
    }

    /// The constant-1 potential over an empty scope.
    pub fn unit() -> Self {
        Potential {
            scope: Vec::new(),
            cards: Vec::new(),
            table: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn position_of(&self, var: usize) -> Option<usize> {
        self.scope.iter().position(|&v| v == var)
    }

    /// Value at a full assignment given as (var, state) pairs covering
    /// the scope (extra pairs are ignored).
    pub fn value_at(&self, assignment: &[(usize, usize)]) -> f64 {
        let states: Vec<usize> = self
            .scope
            .iter()
            .map(|&v| {
                assignment
                    .iter()
                    .find(|(a, _)| *a == v)
                    .expect("assignment covers scope")
                    .1
            })
            .collect();
        self.table[radix::config_index(&self.cards, &states)]
    }

    /// Product of two potentials over the union scope (sorted by
    /// variable index).
    pub fn multiply(&self, other: &Potential) -> Potential {
        let mut scope: Vec<usize> = self.scope.clone();
        for &v in &other.scope {
            if !scope.contains(&v) {
                scope.push(v);
            }
        }
        scope.sort_unstable();
        let cards: Vec<usize> = scope
            .iter()
            .map(|&v| {
                self.position_of(v)
                    .map(|i| self.cards[i])
                    .or_else(|| other.position_of(v).map(|i| other.cards[i]))
                    .unwrap()
            })
            .collect();
        let maps_a = index_map(&scope, &self.scope, &self.cards);
        let maps_b = index_map(&scope, &other.scope, &other.cards);
        let mut table = vec![0.0; radix::config_count(&cards)];
        let mut states = vec![0usize; scope.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            radix::unrank_into(&cards, idx, &mut states);
            let ia = apply_map(&maps_a, &states);
            let ib = apply_map(&maps_b, &states);
            *slot = self.table[ia] * other.table[ib];
        }
        Potential {
            scope,
            cards,
            table,
        }
    }

    /// Sums out one variable.
    pub fn sum_out(&self, var: usize) -> Potential {
        let pos = self.position_of(var).expect("variable in scope");
        let m = self.cards[pos];
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut table = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..m {
                let base = (o * m + s) * inner;
                let dst = o * inner;
                for i in 0..inner {
                    table[dst + i] += self.table[base + i];
                }
            }
        }
        Potential {
            scope,
            cards,
            table,
        }
    }

    /// Restricts a variable to a fixed state, dropping it from the
    /// scope.
    pub fn restrict(&self, var: usize, state: usize) -> Potential {
        let pos = self.position_of(var).expect("variable in scope");
        let m = self.cards[pos];
        assert!(state < m);
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut table = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * m + state) * inner;
            table.extend_from_slice(&self.table[base..base + inner]);
        }
        Potential {
            scope,
            cards,
            table,
        }
    }

    /// Reorders the scope (a permutation of the current one).
    pub fn permute(&self, new_scope: &[usize]) -> Potential {
        assert_eq!(new_scope.len(), self.scope.len());
        let cards: Vec<usize> = new_scope
            .iter()
            .map(|&v| self.cards[self.position_of(v).expect("permutation")])
            .collect();
        let map = index_map(new_scope, &self.scope, &self.cards);
        let mut table = vec![0.0; self.table.len()];
        let mut states = vec![0usize; new_scope.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            radix::unrank_into(&cards, idx, &mut states);
            *slot = self.table[apply_map(&map, &states)];
        }
        Potential {
            scope: new_scope.to_vec(),
            cards,
            table,
        }
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Normalizes each slice over the last axis (the child axis of a
    /// conditional table) to sum to one. Returns the largest relative
    /// correction applied; all-zero slices become uniform.
    pub fn normalize_last_axis(&mut self) -> f64 {
        let m = *self.cards.last().expect("nonempty scope");
        let mut worst: f64 = 0.0;
        for chunk in self.table.chunks_mut(m) {
            let sum: f64 = chunk.iter().sum();
            if sum <= 0.0 {
                for v in chunk.iter_mut() {
                    *v = 1.0 / m as f64;
                }
                worst = worst.max(1.0);
            } else {
                worst = worst.max((sum - 1.0).abs());
                for v in chunk.iter_mut() {
                    *v /= sum;
                }
            }
        }
        worst
    }
}

/// For each target-scope position, the stride it contributes to an
/// index into the source table (0 when the source lacks the variable).
fn index_map(target: &[usize], source_scope: &[usize], source_cards: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; source_scope.len()];
    let mut acc = 1usize;
    for i in (0..source_scope.len()).rev() {
        strides[i] = acc;
        acc *= source_cards[i];
    }
    target
        .iter()
        .map(|v| {
            source_scope
                .iter()
                .position(|s| s == v)
                .map(|i| strides[i])
                .unwrap_or(0)
        })
        .collect()
}

fn apply_map(map: &[usize], states: &[usize]) -> usize {
    map.iter().zip(states).map(|(stride, s)| stride * s).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiply_aligns_shared_variables() {
        // f(a) * g(a, b)
        let f = Potential::new(vec![0], vec![2], vec![0.3, 0.7]);
        let g = Potential::new(vec![0, 1], vec![2, 2], vec![0.9, 0.1, 0.2, 0.8]);
        let h = f.multiply(&g);
        assert_eq!(h.scope, vec![0, 1]);
        assert!((h.value_at(&[(0, 0), (1, 0)]) - 0.27).abs() < 1e-15);
        assert!((h.value_at(&[(0, 1), (1, 1)]) - 0.56).abs() < 1e-15);

        // commutes
        let h2 = g.multiply(&f);
        assert_eq!(h.table, h2.table);
    }

    #[test]
    fn sum_out_and_restrict() {
        let g = Potential::new(vec![3, 7], vec![2, 3], vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.2]);
        let marg = g.sum_out(7);
        assert_eq!(marg.scope, vec![3]);
        assert!((marg.table[0] - 0.6).abs() < 1e-15);
        assert!((marg.table[1] - 0.4).abs() < 1e-15);

        let r = g.restrict(3, 1);
        assert_eq!(r.scope, vec![7]);
        assert_eq!(r.table, vec![0.05, 0.15, 0.2]);

        let r2 = g.restrict(7, 2);
        assert_eq!(r2.table, vec![0.3, 0.2]);
    }

    #[test]
    fn permute_round_trips() {
        let g = Potential::new(vec![1, 2, 5], vec![2, 3, 2], (0..12).map(|i| i as f64).collect());
        let p = g.permute(&[5, 1, 2]);
        assert_eq!(p.scope, vec![5, 1, 2]);
        assert_eq!(
            p.value_at(&[(1, 1), (2, 2), (5, 0)]),
            g.value_at(&[(1, 1), (2, 2), (5, 0)])
        );
        let back = p.permute(&[1, 2, 5]);
        assert_eq!(back.table, g.table);
    }

    #[test]
    fn normalize_last_axis_handles_zero_slices() {
        let mut g = Potential::new(vec![0, 1], vec![2, 2], vec![0.5, 0.6, 0.0, 0.0]);
        let worst = g.normalize_last_axis();
        assert!((g.table[0] - 0.5 / 1.1).abs() < 1e-15);
        assert_eq!(&g.table[2..], &[0.5, 0.5]);
        assert!(worst >= 1.0);
    }

    #[test]
    fn unit_is_multiplicative_identity() {
        let g = Potential::new(vec![4], vec![3], vec![0.2, 0.3, 0.5]);
        let h = Potential::unit().multiply(&g);
        assert_eq!(h.scope, g.scope);
        assert_eq!(h.table, g.table);
    }
}

//! Event domains composed from limit-state expressions through the
//! min/max cut-set structure: the event is
//! `min over cut sets (max over members g_i(x)) <= 0`, so a single cut
//! set is an intersection (parallel system), several singleton cut sets
//! form a union (series system).

use crate::lsf::expr::{eval_expr, CompiledExpr, Expr};
use crate::lsf::EvalError;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// A cut-set composition of limit-state expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    /// Outer: cut sets (combined by min / union); inner: members
    /// (combined by max / intersection). Never empty.
    pub cutsets: Vec<Vec<Expr>>,
}

impl DomainSpec {
    pub fn new(cutsets: Vec<Vec<Expr>>) -> Self {
        assert!(
            !cutsets.is_empty() && cutsets.iter().all(|c| !c.is_empty()),
            "a domain needs at least one nonempty cut set"
        );
        DomainSpec { cutsets }
    }

    /// A component domain: one cut set with one expression.
    pub fn component(g: Expr) -> Self {
        DomainSpec {
            cutsets: vec![vec![g]],
        }
    }

    /// A pure intersection of expressions (one parallel cut set).
    pub fn intersection(gs: Vec<Expr>) -> Self {
        assert!(!gs.is_empty());
        DomainSpec { cutsets: vec![gs] }
    }

    /// System g-value: `min_k max_{i in C_k} g_i(x)`. Membership is
    /// `value <= 0`.
    pub fn value(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        let mut best = f64::INFINITY;
        for cutset in &self.cutsets {
            let mut worst = f64::NEG_INFINITY;
            for g in cutset {
                worst = worst.max(eval_expr(g, bindings)?);
            }
            best = best.min(worst);
        }
        Ok(best)
    }

    /// Membership test (ties at zero count as inside).
    pub fn contains(&self, bindings: &HashMap<String, f64>) -> Result<bool, EvalError> {
        Ok(self.value(bindings)? <= 0.0)
    }

    /// All variables referenced by any member expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for cutset in &self.cutsets {
            for g in cutset {
                out.append(&mut g.free_vars());
            }
        }
        out
    }

    /// Intersection of two domains. Distributes unions over the
    /// intersection: the result's cut sets are the pairwise
    /// concatenations of the operands' cut sets.
    pub fn intersect(&self, other: &DomainSpec) -> DomainSpec {
        let mut cutsets = Vec::with_capacity(self.cutsets.len() * other.cutsets.len());
        for a in &self.cutsets {
            for b in &other.cutsets {
                let mut joined = a.clone();
                joined.extend(b.iter().cloned());
                cutsets.push(joined);
            }
        }
        DomainSpec { cutsets }
    }

    /// Substitutes constants into every member expression.
    pub fn bind_consts(&self, values: &HashMap<String, f64>) -> DomainSpec {
        DomainSpec {
            cutsets: self
                .cutsets
                .iter()
                .map(|c| c.iter().map(|g| g.bind_consts(values)).collect())
                .collect(),
        }
    }

    /// Renames variables in every member expression.
    pub fn rename_vars(&self, renames: &HashMap<String, String>) -> DomainSpec {
        DomainSpec {
            cutsets: self
                .cutsets
                .iter()
                .map(|c| c.iter().map(|g| g.rename_vars(renames)).collect())
                .collect(),
        }
    }

    /// True when the domain is a single cut set with a single smooth
    /// expression (the shape FORM can handle).
    pub fn is_single_smooth(&self) -> bool {
        self.cutsets.len() == 1
            && self.cutsets[0].len() == 1
            && !self.cutsets[0][0].has_nonsmooth_ops()
    }

    /// True when any member expression uses min/max/abs.
    pub fn has_nonsmooth_ops(&self) -> bool {
        self.cutsets
            .iter()
            .any(|c| c.iter().any(|g| g.has_nonsmooth_ops()))
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, cutset) in self.cutsets.iter().enumerate() {
            if k > 0 {
                write!(f, " OR ")?;
            }
            write!(f, "[")?;
            for (i, g) in cutset.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

/// A domain compiled against a fixed slot layout.
#[derive(Debug, Clone)]
pub struct CompiledDomain {
    cutsets: Vec<Vec<CompiledExpr>>,
}

impl CompiledDomain {
    pub fn compile(d: &DomainSpec, slots: &HashMap<String, usize>) -> Result<Self, EvalError> {
        Ok(CompiledDomain {
            cutsets: d
                .cutsets
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|g| CompiledExpr::compile(g, slots))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?,
        })
    }

    pub fn value(&self, slots: &[f64], stack: &mut Vec<f64>) -> Result<f64, EvalError> {
        let mut best = f64::INFINITY;
        for cutset in &self.cutsets {
            let mut worst = f64::NEG_INFINITY;
            for g in cutset {
                worst = worst.max(g.eval_with(slots, stack)?);
            }
            best = best.min(worst);
        }
        Ok(best)
    }

    /// Single-expression fast path used by FORM.
    pub fn single(&self) -> Option<&CompiledExpr> {
        if self.cutsets.len() == 1 && self.cutsets[0].len() == 1 {
            Some(&self.cutsets[0][0])
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsf::expr::parse_expr;
    use crate::srm::rng::CountingRng;

    fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn component_domain_reduces_to_plain_evaluation() {
        let g = parse_expr("2*r - s").unwrap();
        let d = DomainSpec::component(g.clone());
        let b = bind(&[("r", 0.25), ("s", 3.0)]);
        assert_eq!(d.value(&b).unwrap(), eval_expr(&g, &b).unwrap());
    }

    #[test]
    fn series_and_parallel_semantics() {
        let g1 = parse_expr("-1").unwrap();
        let g2 = parse_expr("1").unwrap();
        // series: two singleton cut sets, min(-1, 1) = -1 -> inside
        let series = DomainSpec::new(vec![vec![g1.clone()], vec![g2.clone()]]);
        assert_eq!(series.value(&bind(&[])).unwrap(), -1.0);
        assert!(series.contains(&bind(&[])).unwrap());
        // parallel: one cut set, max(-1, 1) = 1 -> outside
        let parallel = DomainSpec::new(vec![vec![g1, g2]]);
        assert_eq!(parallel.value(&bind(&[])).unwrap(), 1.0);
        assert!(!parallel.contains(&bind(&[])).unwrap());
    }

    #[test]
    fn tie_at_zero_is_inside() {
        let d = DomainSpec::component(parse_expr("0").unwrap());
        assert!(d.contains(&bind(&[])).unwrap());
    }

    /// Membership through the min/max value agrees with direct boolean
    /// cut-set logic on random bindings.
    #[test]
    fn value_agrees_with_boolean_logic_on_random_bindings() {
        let d = DomainSpec::new(vec![
            vec![
                parse_expr("x - 0.5").unwrap(),
                parse_expr("y + 0.2").unwrap(),
            ],
            vec![parse_expr("x + y").unwrap()],
        ]);
        let mut rng = CountingRng::new(11, 0);
        for _ in 0..10_000 {
            let x = rng.standard_normal();
            let y = rng.standard_normal();
            let b = bind(&[("x", x), ("y", y)]);
            let via_value = d.contains(&b).unwrap();
            let direct = (x - 0.5 <= 0.0 && y + 0.2 <= 0.0) || (x + y <= 0.0);
            assert_eq!(via_value, direct, "x={x} y={y}");
        }
    }

    #[test]
    fn intersect_distributes_cutsets() {
        let a = DomainSpec::new(vec![
            vec![parse_expr("a1").unwrap()],
            vec![parse_expr("a2").unwrap()],
        ]);
        let b = DomainSpec::new(vec![vec![parse_expr("b1").unwrap()]]);
        let joined = a.intersect(&b);
        assert_eq!(joined.cutsets.len(), 2);
        assert!(joined.cutsets.iter().all(|c| c.len() == 2));
        // (A1 or A2) and B1 membership agrees pointwise
        for (va1, va2, vb1) in [(-1.0, 1.0, -1.0), (1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            let binding = bind(&[("a1", va1), ("a2", va2), ("b1", vb1)]);
            let expect = (va1 <= 0.0 || va2 <= 0.0) && vb1 <= 0.0;
            assert_eq!(joined.contains(&binding).unwrap(), expect);
        }
    }

    #[test]
    fn compiled_domain_matches_interpreted() {
        let d = DomainSpec::new(vec![
            vec![parse_expr("phi(x) - 0.7").unwrap()],
            vec![parse_expr("y - x").unwrap(), parse_expr("-y - 2").unwrap()],
        ]);
        let slots: HashMap<String, usize> = [("x".to_string(), 0), ("y".to_string(), 1)].into();
        let c = CompiledDomain::compile(&d, &slots).unwrap();
        let mut stack = Vec::new();
        let mut rng = CountingRng::new(3, 1);
        for _ in 0..100 {
            let x = rng.standard_normal();
            let y = rng.standard_normal();
            let slow = d.value(&bind(&[("x", x), ("y", y)])).unwrap();
            let fast = c.value(&[x, y], &mut stack).unwrap();
            assert_eq!(slow, fast);
        }
    }
}

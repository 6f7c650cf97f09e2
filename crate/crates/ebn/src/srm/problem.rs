//! Reliability problems: a continuous probability space (possibly
//! assembled from several conditional blocks) plus an event domain.

use crate::dist::{phi, CholFactor, JointSpec, Marginal};
use crate::lsf::{CompiledDomain, CompiledExpr, DomainSpec, Expr};
use crate::model::{FamilyKind, MarginalSpec};
use crate::srm::SrmError;
use std::collections::HashMap;

/// One continuous node's components: marginals (whose parameters may
/// reference variables of earlier blocks) coupled by a copula factor.
#[derive(Debug, Clone)]
pub struct SpaceBlock {
    pub names: Vec<String>,
    pub marginals: Vec<MarginalSpec>,
    pub chol: CholFactor,
}

/// An ordered sequence of blocks; later blocks may condition on the
/// values of earlier ones, giving a Rosenblatt-style transform.
#[derive(Debug, Clone, Default)]
pub struct ProblemSpace {
    pub blocks: Vec<SpaceBlock>,
}

impl ProblemSpace {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.names.len()).sum()
    }

    pub fn names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| b.names.iter().cloned())
            .collect()
    }

    /// Independent standard normal variables, one block.
    pub fn standard_normal(names: &[&str]) -> Self {
        let block = SpaceBlock {
            names: names.iter().map(|s| s.to_string()).collect(),
            marginals: names
                .iter()
                .map(|_| MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0]))
                .collect(),
            chol: CholFactor::identity(names.len()),
        };
        ProblemSpace {
            blocks: vec![block],
        }
    }

    /// A fixed-parameter joint as a single block.
    pub fn from_joint(names: &[&str], joint: &JointSpec) -> Self {
        let block = SpaceBlock {
            names: names.iter().map(|s| s.to_string()).collect(),
            marginals: joint
                .marginals
                .iter()
                .map(|m| MarginalSpec::PerConfig {
                    table: vec![m.clone()],
                })
                .collect(),
            chol: joint.chol.clone(),
        };
        ProblemSpace {
            blocks: vec![block],
        }
    }

    pub fn push_block(&mut self, block: SpaceBlock) {
        self.blocks.push(block);
    }
}

/// A reliability problem: Pr(X in domain) under the space's measure.
#[derive(Debug, Clone)]
pub struct ReliabilityProblem {
    pub space: ProblemSpace,
    pub domain: DomainSpec,
}

impl ReliabilityProblem {
    pub fn new(space: ProblemSpace, domain: DomainSpec) -> Self {
        ReliabilityProblem { space, domain }
    }

    /// A problem over independent standard normals, the form FORM test
    /// cases are stated in.
    pub fn in_standard_space(names: &[&str], domain: DomainSpec) -> Self {
        ReliabilityProblem {
            space: ProblemSpace::standard_normal(names),
            domain,
        }
    }

    /// A problem whose domain is the whole space (used as the base for
    /// the total-probability reduction).
    pub fn certain(space: ProblemSpace) -> Self {
        ReliabilityProblem {
            space,
            domain: DomainSpec::component(Expr::num(-1.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Appends an auxiliary standard normal `x_phi` and the event
/// `x_phi + inv_phi(1 - p_E(x)) <= 0`, whose probability equals
/// the total-probability integral of `p_E` over the space.
pub fn reduce_total_probability(pmf_expr: &Expr, prob: &ReliabilityProblem) -> ReliabilityProblem {
    let existing = prob.space.names();
    let mut k = 0usize;
    let aux = loop {
        let candidate = format!("_phi{k}");
        if !existing.contains(&candidate) {
            break candidate;
        }
        k += 1;
    };
    let mut space = prob.space.clone();
    space.push_block(SpaceBlock {
        names: vec![aux.clone()],
        marginals: vec![MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0])],
        chol: CholFactor::identity(1),
    });
    let aux_expr = Expr::add(
        Expr::var(aux),
        Expr::call(
            crate::lsf::Func::InvPhi,
            vec![Expr::sub(Expr::num(1.0), pmf_expr.clone())],
        ),
    );
    let domain = prob.domain.intersect(&DomainSpec::component(aux_expr));
    ReliabilityProblem { space, domain }
}

enum PreparedMarginal {
    Fixed(Marginal),
    Dynamic {
        family: FamilyKind,
        params: Vec<CompiledExpr>,
    },
}

struct PreparedBlock {
    slot_base: usize,
    marginals: Vec<PreparedMarginal>,
    chol: CholFactor,
}

/// A problem compiled against a flat slot layout for repeated
/// evaluation: maps standard-normal points to model space and evaluates
/// the domain.
pub struct PreparedProblem {
    blocks: Vec<PreparedBlock>,
    domain: CompiledDomain,
    single: bool,
    dim: usize,
    stack: Vec<f64>,
    zbuf: Vec<f64>,
}

impl PreparedProblem {
    pub fn new(prob: &ReliabilityProblem) -> Result<Self, SrmError> {
        let mut slots: HashMap<String, usize> = HashMap::new();
        for name in prob.space.names() {
            let next = slots.len();
            if slots.insert(name.clone(), next).is_some() {
                return Err(SrmError::BadProblem(format!(
                    "duplicate variable `{name}` in problem space"
                )));
            }
        }
        let dim = slots.len();
        for v in prob.domain.free_vars() {
            if !slots.contains_key(&v) {
                return Err(SrmError::BadProblem(format!(
                    "domain references `{v}`, which the space does not cover"
                )));
            }
        }
        let mut blocks = Vec::with_capacity(prob.space.blocks.len());
        let mut base = 0usize;
        let mut max_block = 1usize;
        for b in &prob.space.blocks {
            let mut marginals = Vec::with_capacity(b.marginals.len());
            for spec in &b.marginals {
                let prepared = match spec {
                    MarginalSpec::PerConfig { table } if table.len() == 1 => {
                        PreparedMarginal::Fixed(table[0].clone())
                    }
                    MarginalSpec::PerConfig { .. } => {
                        return Err(SrmError::BadProblem(
                            "per-configuration marginal not resolved to a cell".into(),
                        ))
                    }
                    MarginalSpec::Param { family, params } => {
                        if params.iter().all(|p| matches!(p, Expr::Num(_))) {
                            let vals: Vec<f64> = params
                                .iter()
                                .map(|p| match p {
                                    Expr::Num(v) => *v,
                                    _ => unreachable!(),
                                })
                                .collect();
                            PreparedMarginal::Fixed(
                                family
                                    .construct(&vals)
                                    .map_err(|e| SrmError::BadProblem(e.to_string()))?,
                            )
                        } else {
                            // Parameters may reference earlier blocks only.
                            for p in params {
                                for v in p.free_vars() {
                                    match slots.get(&v) {
                                        Some(&idx) if idx < base => {}
                                        _ => {
                                            return Err(SrmError::BadProblem(format!(
                                                "marginal parameter references `{v}`, which is \
                                                 not determined earlier in the space"
                                            )))
                                        }
                                    }
                                }
                            }
                            PreparedMarginal::Dynamic {
                                family: *family,
                                params: params
                                    .iter()
                                    .map(|p| CompiledExpr::compile(p, &slots))
                                    .collect::<Result<_, _>>()
                                    .map_err(|e| SrmError::BadProblem(e.to_string()))?,
                            }
                        }
                    }
                };
                marginals.push(prepared);
            }
            blocks.push(PreparedBlock {
                slot_base: base,
                marginals,
                chol: b.chol.clone(),
            });
            max_block = max_block.max(b.names.len());
            base += b.names.len();
        }
        let domain = CompiledDomain::compile(&prob.domain, &slots)
            .map_err(|e| SrmError::BadProblem(e.to_string()))?;
        Ok(PreparedProblem {
            blocks,
            single: prob.domain.is_single_smooth(),
            domain,
            dim,
            stack: Vec::with_capacity(16),
            zbuf: vec![0.0; max_block],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the domain is a single smooth expression (FORM shape).
    pub fn is_single_smooth(&self) -> bool {
        self.single
    }

    /// Maps a standard-normal point into model space, writing component
    /// values into `slots`.
    pub fn map_to_model(&mut self, u: &[f64], slots: &mut [f64]) -> Result<(), SrmError> {
        debug_assert_eq!(u.len(), self.dim);
        for b in &self.blocks {
            let k = b.marginals.len();
            let zb = &mut self.zbuf[..k];
            b.chol.forward(&u[b.slot_base..b.slot_base + k], zb);
            for i in 0..k {
                let p = phi(zb[i]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                let x = match &b.marginals[i] {
                    PreparedMarginal::Fixed(m) => m.inv_cdf_unchecked(p),
                    PreparedMarginal::Dynamic { family, params } => {
                        let mut vals = Vec::with_capacity(params.len());
                        for pe in params {
                            vals.push(
                                pe.eval_with(slots, &mut self.stack)
                                    .map_err(|e| SrmError::Eval(e.to_string()))?,
                            );
                        }
                        family
                            .construct(&vals)
                            .map_err(|e| SrmError::Eval(e.to_string()))?
                            .inv_cdf_unchecked(p)
                    }
                };
                slots[b.slot_base + i] = x;
            }
        }
        Ok(())
    }

    /// System g-value at a standard-normal point.
    pub fn g_value(&mut self, u: &[f64], slots: &mut [f64]) -> Result<f64, SrmError> {
        self.map_to_model(u, slots)?;
        let mut stack = std::mem::take(&mut self.stack);
        let r = self.domain.value(slots, &mut stack);
        self.stack = stack;
        r.map_err(|e| SrmError::Eval(e.to_string()))
    }

    /// Membership test at a standard-normal point.
    pub fn indicator(&mut self, u: &[f64], slots: &mut [f64]) -> Result<bool, SrmError> {
        Ok(self.g_value(u, slots)? <= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsf::parse_expr;

    #[test]
    fn standard_space_maps_identity() {
        let prob = ReliabilityProblem::in_standard_space(
            &["u1", "u2"],
            DomainSpec::component(parse_expr("3 - u1").unwrap()),
        );
        let mut prepared = PreparedProblem::new(&prob).unwrap();
        let mut slots = vec![0.0; 2];
        prepared.map_to_model(&[0.7, -1.1], &mut slots).unwrap();
        assert!((slots[0] - 0.7).abs() < 1e-12);
        assert!((slots[1] + 1.1).abs() < 1e-12);
        assert!((prepared.g_value(&[0.7, -1.1], &mut slots).unwrap() - 2.3).abs() < 1e-12);
    }

    #[test]
    fn conditional_blocks_resolve_in_order() {
        // x1 ~ N(0,1); x2 | x1 ~ N(2 * x1, 1)
        let mut space = ProblemSpace::standard_normal(&["x1"]);
        space.push_block(SpaceBlock {
            names: vec!["x2".into()],
            marginals: vec![MarginalSpec::Param {
                family: FamilyKind::Normal,
                params: vec![parse_expr("2 * x1").unwrap(), Expr::num(1.0)],
            }],
            chol: CholFactor::identity(1),
        });
        let prob = ReliabilityProblem::new(
            space,
            DomainSpec::component(parse_expr("x2").unwrap()),
        );
        let mut prepared = PreparedProblem::new(&prob).unwrap();
        let mut slots = vec![0.0; 2];
        prepared.map_to_model(&[1.0, 0.5], &mut slots).unwrap();
        assert!((slots[0] - 1.0).abs() < 1e-12);
        assert!((slots[1] - 2.5).abs() < 1e-9); // 2*1.0 + 0.5
    }

    #[test]
    fn forward_references_are_rejected() {
        let mut space = ProblemSpace::default();
        space.push_block(SpaceBlock {
            names: vec!["a".into()],
            marginals: vec![MarginalSpec::Param {
                family: FamilyKind::Normal,
                params: vec![parse_expr("b").unwrap(), Expr::num(1.0)],
            }],
            chol: CholFactor::identity(1),
        });
        space.push_block(SpaceBlock {
            names: vec!["b".into()],
            marginals: vec![MarginalSpec::constant(FamilyKind::Normal, &[0.0, 1.0])],
            chol: CholFactor::identity(1),
        });
        let prob = ReliabilityProblem::new(
            space,
            DomainSpec::component(parse_expr("a").unwrap()),
        );
        assert!(PreparedProblem::new(&prob).is_err());
    }

    #[test]
    fn domain_variables_must_be_covered() {
        let prob = ReliabilityProblem::in_standard_space(
            &["u1"],
            DomainSpec::component(parse_expr("u1 + missing").unwrap()),
        );
        assert!(matches!(
            PreparedProblem::new(&prob),
            Err(SrmError::BadProblem(_))
        ));
    }
}

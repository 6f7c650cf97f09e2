//! Sampling estimators: crude Monte Carlo and importance sampling
//! centered at a design point.
//!
//! Samples are drawn in fixed-size blocks, each block from its own
//! derived stream, and reduced in block order; estimates therefore
//! depend only on (seed, n) and never on scheduling.

use crate::srm::form::{form_iterate, FormOptions};
use crate::srm::problem::{PreparedProblem, ReliabilityProblem};
use crate::srm::rng::CountingRng;
use crate::srm::SrmError;

const BLOCK: u64 = 4096;

/// A sampling-based probability estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub p: f64,
    /// Coefficient of variation of the estimate; `None` when no hits
    /// were scored (the estimate carries no error information).
    pub cov: Option<f64>,
    pub n: u64,
    pub seed: u64,
}

/// Sample-count policy for crude Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McPolicy {
    FixedN(u64),
    /// Doubles the sample count until the coefficient of variation
    /// reaches `target` or the cap is hit.
    TargetCov { target: f64, n_max: u64 },
}

/// Crude Monte Carlo: standard-normal draws mapped through the space,
/// counting domain membership.
pub fn mc_probability(
    prob: &ReliabilityProblem,
    policy: McPolicy,
    seed: u64,
) -> Result<EstimateResult, SrmError> {
    let mut prepared = PreparedProblem::new(prob)?;
    let d = prepared.dim();
    let mut slots = vec![0.0; d];
    let mut u = vec![0.0; d];

    let (mut n_goal, target, n_max) = match policy {
        McPolicy::FixedN(n) => (n.max(1), None, n.max(1)),
        McPolicy::TargetCov { target, n_max } => {
            (BLOCK.min(n_max.max(1)), Some(target), n_max.max(1))
        }
    };

    let mut hits: u64 = 0;
    let mut n_done: u64 = 0;
    let mut block_idx: u64 = 0;
    loop {
        while n_done < n_goal {
            let todo = (n_goal - n_done).min(BLOCK);
            let mut rng = CountingRng::new(seed, block_idx);
            for _ in 0..todo {
                for ui in u.iter_mut() {
                    *ui = rng.standard_normal();
                }
                if prepared.indicator(&u, &mut slots)? {
                    hits += 1;
                }
            }
            n_done += todo;
            block_idx += 1;
        }
        let p = hits as f64 / n_done as f64;
        match target {
            None => break,
            Some(c_star) => {
                let cov_now = if hits > 0 {
                    ((1.0 - p) / (p * n_done as f64)).sqrt()
                } else {
                    f64::INFINITY
                };
                if cov_now <= c_star || n_done >= n_max {
                    break;
                }
                n_goal = (n_goal * 2).min(n_max);
            }
        }
    }

    let p = hits as f64 / n_done as f64;
    let cov = if hits > 0 {
        Some(((1.0 - p) / (p * n_done as f64)).sqrt())
    } else {
        None
    };
    Ok(EstimateResult {
        p,
        cov,
        n: n_done,
        seed,
    })
}

/// Importance sampling from a standard normal shifted to `center`
/// (typically the FORM design point). With the center at the origin the
/// draws and the estimate reduce to crude Monte Carlo.
pub fn is_probability(
    prob: &ReliabilityProblem,
    center: &[f64],
    n: u64,
    seed: u64,
) -> Result<EstimateResult, SrmError> {
    let mut prepared = PreparedProblem::new(prob)?;
    let d = prepared.dim();
    if center.len() != d {
        return Err(SrmError::BadProblem(format!(
            "center has {} coordinates for a {d}-dimensional space",
            center.len()
        )));
    }
    if center.iter().any(|c| !c.is_finite()) {
        return Err(SrmError::BadProblem("center must be finite".into()));
    }
    let n = n.max(1);
    let mut slots = vec![0.0; d];
    let mut v = vec![0.0; d];
    let c_sq: f64 = center.iter().map(|c| c * c).sum();

    let mut sum_w = 0.0;
    let mut sum_w_sq = 0.0;
    let mut hits: u64 = 0;
    let mut n_done: u64 = 0;
    let mut block_idx: u64 = 0;
    while n_done < n {
        let todo = (n - n_done).min(BLOCK);
        let mut rng = CountingRng::new(seed, block_idx);
        for _ in 0..todo {
            // v = center + z, weight phi(v)/phi(v - center)
            let mut zc = 0.0;
            for (i, vi) in v.iter_mut().enumerate() {
                let z = rng.standard_normal();
                *vi = center[i] + z;
                zc += z * center[i];
            }
            if prepared.indicator(&v, &mut slots)? {
                hits += 1;
                let w = (-0.5 * c_sq - zc).exp();
                sum_w += w;
                sum_w_sq += w * w;
            }
        }
        n_done += todo;
        block_idx += 1;
    }

    let nf = n_done as f64;
    let p = sum_w / nf;
    let cov = if hits > 0 && p > 0.0 {
        let var = ((sum_w_sq - nf * p * p) / (nf - 1.0)).max(0.0) / nf;
        Some(var.sqrt() / p)
    } else {
        None
    };
    Ok(EstimateResult {
        p,
        cov,
        n: n_done,
        seed,
    })
}

/// System solve method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemMethod {
    Mc(McPolicy),
    /// FORM on the active constraint for a center, then importance
    /// sampling there; falls back to crude MC when FORM fails.
    IsAtJointBeta { n: u64 },
}

impl Default for SystemMethod {
    fn default() -> Self {
        SystemMethod::Mc(McPolicy::TargetCov {
            target: 0.05,
            n_max: 10_000_000,
        })
    }
}

/// Estimates the probability of a general min/max cut-set domain.
pub fn system_probability(
    prob: &ReliabilityProblem,
    method: SystemMethod,
    seed: u64,
) -> Result<EstimateResult, SrmError> {
    match method {
        SystemMethod::Mc(policy) => mc_probability(prob, policy, seed),
        SystemMethod::IsAtJointBeta { n } => {
            let mut prepared = PreparedProblem::new(prob)?;
            let centered = form_iterate(&mut prepared, FormOptions::default());
            match centered {
                Ok(r) if r.converged && r.u_star.iter().all(|v| v.is_finite()) => {
                    is_probability(prob, &r.u_star, n, seed)
                }
                _ => mc_probability(
                    prob,
                    McPolicy::TargetCov {
                        target: 0.05,
                        n_max: 10_000_000,
                    },
                    seed,
                ),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::phi;
    use crate::lsf::{parse_expr, DomainSpec, Expr};
    use crate::srm::form::form_component;
    use crate::srm::problem::{reduce_total_probability, ProblemSpace};

    fn component(names: &[&str], g: &str) -> ReliabilityProblem {
        ReliabilityProblem::in_standard_space(names, DomainSpec::component(parse_expr(g).unwrap()))
    }

    #[test]
    fn half_space_is_one_half() {
        let prob = component(&["u1"], "u1");
        let r = mc_probability(&prob, McPolicy::FixedN(10_000), 42).unwrap();
        let cov = r.cov.unwrap();
        assert!((r.p - 0.5).abs() < 3.0 * cov * 0.5 + 1e-12, "p {}", r.p);
        assert_eq!(r.n, 10_000);
    }

    #[test]
    fn empty_domain_reports_zero_hits() {
        let prob = component(&["u1"], "1");
        let r = mc_probability(
            &prob,
            McPolicy::TargetCov {
                target: 0.05,
                n_max: 20_000,
            },
            7,
        )
        .unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.cov.is_none());
        assert_eq!(r.n, 20_000);
    }

    #[test]
    fn series_system_by_inclusion_exclusion() {
        // u1 <= 0 or u2 <= 0: p = 1 - 0.25 = 0.75
        let d = DomainSpec::new(vec![
            vec![parse_expr("u1").unwrap()],
            vec![parse_expr("u2").unwrap()],
        ]);
        let prob = ReliabilityProblem::in_standard_space(&["u1", "u2"], d);
        let r = mc_probability(&prob, McPolicy::FixedN(40_000), 3).unwrap();
        let se = r.cov.unwrap() * r.p;
        assert!((r.p - 0.75).abs() < 3.0 * se, "p {}", r.p);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let prob = component(&["u1", "u2"], "1.5 - u1 - 0.3*u2");
        let a = mc_probability(&prob, McPolicy::FixedN(30_000), 99).unwrap();
        let b = mc_probability(&prob, McPolicy::FixedN(30_000), 99).unwrap();
        assert_eq!(a, b);
        let c = mc_probability(&prob, McPolicy::FixedN(30_000), 100).unwrap();
        assert_ne!(a.p, c.p);
    }

    #[test]
    fn target_cov_policy_doubles_until_reached() {
        let prob = component(&["u1"], "1.2816 - u1"); // p ~ 0.1
        let r = mc_probability(
            &prob,
            McPolicy::TargetCov {
                target: 0.05,
                n_max: 1 << 20,
            },
            5,
        )
        .unwrap();
        assert!(r.cov.unwrap() <= 0.05);
        // (1-p)/(p c^2) ~ 3600 samples needed; the doubling schedule
        // stops at the first power-of-two block count that satisfies it
        assert!(r.n <= 8192, "n {}", r.n);
    }

    #[test]
    fn importance_sampling_at_origin_reduces_to_crude_mc() {
        let prob = component(&["u1", "u2"], "1 - u1 + u2");
        let mc = mc_probability(&prob, McPolicy::FixedN(8192), 11).unwrap();
        let is = is_probability(&prob, &[0.0, 0.0], 8192, 11).unwrap();
        assert_eq!(mc.p.to_bits(), is.p.to_bits());
    }

    #[test]
    fn importance_sampling_hits_rare_linear_reference() {
        // G = 3 - u1: p = Phi(-3), center at the design point (3, ...)
        let prob = component(&["u1"], "3 - u1");
        let r = is_probability(&prob, &[3.0], 10_000, 13).unwrap();
        let cov = r.cov.unwrap();
        assert!(cov <= 0.05, "cov {cov}");
        let reference = 0.001349898031630095;
        assert!((r.p - reference).abs() < 3.0 * cov * reference, "p {}", r.p);
    }

    #[test]
    fn importance_sampling_with_form_center_two_dim() {
        let prob = component(&["u1", "u2"], "2 - (u1 + u2)/1.4142135623730951");
        let form = form_component(&prob, FormOptions::default()).unwrap();
        let r = is_probability(&prob, &form.u_star, 10_000, 17).unwrap();
        let reference = phi(-2.0);
        let cov = r.cov.unwrap();
        assert!((r.p - reference).abs() < 3.0 * cov * reference);
    }

    #[test]
    fn total_probability_reduction_constant() {
        // p_E = 0.1 independent of x: probability 0.1
        let base = ReliabilityProblem::certain(ProblemSpace::standard_normal(&["x"]));
        let reduced = reduce_total_probability(&Expr::num(0.1), &base);
        let r = mc_probability(&reduced, McPolicy::FixedN(60_000), 21).unwrap();
        let se = r.cov.unwrap() * r.p;
        assert!((r.p - 0.1).abs() < 3.0 * se, "p {}", r.p);
    }

    #[test]
    fn total_probability_reduction_phi_of_x() {
        // p_E(x) = Phi(-x), x ~ N(0,1): total probability is exactly 1/2
        let base = ReliabilityProblem::certain(ProblemSpace::standard_normal(&["x"]));
        let pexpr = parse_expr("phi(-x)").unwrap();
        let reduced = reduce_total_probability(&pexpr, &base);
        assert_eq!(reduced.dim(), 2);
        let r = mc_probability(&reduced, McPolicy::FixedN(120_000), 23).unwrap();
        let se = r.cov.unwrap() * r.p;
        assert!((r.p - 0.5).abs() < 3.0 * se, "p {}", r.p);
    }

    #[test]
    fn total_probability_reduction_zero() {
        let base = ReliabilityProblem::certain(ProblemSpace::standard_normal(&["x"]));
        let reduced = reduce_total_probability(&Expr::num(0.0), &base);
        let r = mc_probability(&reduced, McPolicy::FixedN(5_000), 29).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.cov.is_none());
    }

    #[test]
    fn pmf_outside_unit_interval_is_an_error() {
        let base = ReliabilityProblem::certain(ProblemSpace::standard_normal(&["x"]));
        let reduced = reduce_total_probability(&parse_expr("1.5 + 0*x").unwrap(), &base);
        assert!(mc_probability(&reduced, McPolicy::FixedN(100), 1).is_err());
    }

    #[test]
    fn parallel_system_of_independent_half_spaces() {
        // u1 <= 0 and u2 <= 0: 0.25
        let d = DomainSpec::intersection(vec![
            parse_expr("u1").unwrap(),
            parse_expr("u2").unwrap(),
        ]);
        let prob = ReliabilityProblem::in_standard_space(&["u1", "u2"], d);
        let r = system_probability(&prob, SystemMethod::default(), 31).unwrap();
        let se = r.cov.unwrap() * r.p;
        assert!((r.p - 0.25).abs() < 3.0 * se);
    }

    #[test]
    fn degenerate_system_agrees_with_component_mc() {
        let prob = component(&["u1"], "0.5 - u1");
        let a = mc_probability(
            &prob,
            McPolicy::TargetCov {
                target: 0.05,
                n_max: 10_000_000,
            },
            37,
        )
        .unwrap();
        let b = system_probability(&prob, SystemMethod::default(), 37).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perfectly_dependent_parallel_components() {
        // two copies of the same half-space u1 <= -1: intersection is
        // the same event, p = Phi(-1)
        let d = DomainSpec::intersection(vec![
            parse_expr("1 + u1").unwrap(),
            parse_expr("1 + u1").unwrap(),
        ]);
        let prob = ReliabilityProblem::in_standard_space(&["u1"], d);
        let r = system_probability(&prob, SystemMethod::default(), 41).unwrap();
        let se = r.cov.unwrap() * r.p;
        assert!((r.p - phi(-1.0)).abs() < 3.0 * se);
    }

    #[test]
    fn is_at_joint_beta_matches_reference() {
        let prob = component(&["u1", "u2"], "2.5 - u1 - 0.5*u2");
        let r = system_probability(&prob, SystemMethod::IsAtJointBeta { n: 20_000 }, 43).unwrap();
        let reference = phi(-2.5 / (1.0f64 + 0.25).sqrt());
        let cov = r.cov.unwrap();
        assert!((r.p - reference).abs() < 3.0 * cov * reference);
    }

    /// Nested domains keep their estimated ordering within noise.
    #[test]
    fn nested_domains_are_monotone() {
        let inner = component(&["u1"], "0.5 - u1"); // u1 >= 0.5
        let outer = component(&["u1"], "-0.5 - u1"); // u1 >= -0.5
        let a = mc_probability(&inner, McPolicy::FixedN(20_000), 47).unwrap();
        let b = mc_probability(&outer, McPolicy::FixedN(20_000), 53).unwrap();
        let slack = 3.0
            * (a.cov.unwrap() * a.p + b.cov.unwrap() * b.p);
        assert!(a.p <= b.p + slack);
    }
}

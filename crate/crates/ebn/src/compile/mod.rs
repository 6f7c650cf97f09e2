//! Compilation: turns a hybrid graph plus an elimination plan into a
//! fully parameterized discrete network. Reliability jobs are solved
//! per envelope (concurrently, with per-job seeds so results never
//! depend on scheduling), assembled into envelope joints with the final
//! chain state of each conditioning cell taken by complement, and
//! factorized into per-node conditional tables.

pub mod jobs;
pub mod potential;

pub use jobs::{enumerate_jobs, SrmJob};
pub use potential::Potential;

use crate::model::{radix, DiscreteKind, EbnGraph, NodeId};
use crate::reduce::{EliminationPlan, EnvelopePlan};
use crate::srm::{
    derive_seed, form_component, is_probability, mc_probability, FormOptions, McPolicy,
    PreparedProblem, SrmError,
};
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("envelope with {members} discrete members exceeds the limit of {limit}")]
    EnvelopeTooLarge { members: usize, limit: usize },
    #[error("{failures} cell solve(s) failed (threshold {threshold}): first: {first}")]
    TooManyFailures {
        failures: usize,
        threshold: usize,
        first: String,
    },
    #[error("complement cell {cell} has probability {value}, beyond the noise guard")]
    NegativeResidue { cell: String, value: f64 },
    #[error("cannot factorize: {0}")]
    Factorization(String),
    #[error("local model of `{0}` cannot be tabulated: {1}")]
    LocalModel(String, String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Reliability backend selection for cell solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackendChoice {
    /// Crude Monte Carlo with a target coefficient of variation.
    Mc,
    /// FORM where the cell reduces to a single smooth expression,
    /// Monte Carlo otherwise.
    Form,
    /// Importance sampling centered at the FORM design point, Monte
    /// Carlo fallback.
    Is,
}

#[derive(Debug, Clone)]
pub struct CompileConfig {
    pub backend: BackendChoice,
    /// Target coefficient of variation for sampling backends.
    pub target_cov: f64,
    /// Sample cap per cell.
    pub mc_cap: u64,
    /// Fixed sample count for the importance-sampling backend.
    pub is_n: u64,
    pub base_seed: u64,
    /// Abort when more than this many cells fail hard.
    pub max_failures: usize,
    /// Lift the envelope-size guard.
    pub override_envelope_guard: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            backend: BackendChoice::Mc,
            target_cov: 0.05,
            mc_cap: 1_000_000,
            is_n: 100_000,
            base_seed: 0,
            max_failures: 0,
            override_envelope_guard: false,
        }
    }
}

/// Per-cell record of how a probability was computed.
#[derive(Debug, Clone)]
pub struct CellProvenance {
    pub envelope: usize,
    pub level: usize,
    /// (label, state label) pairs of the cell.
    pub cell: Vec<(String, String)>,
    /// "form", "mc", "is", "complement", or "copy".
    pub backend: String,
    pub p: f64,
    /// FORM reliability index when applicable.
    pub beta: Option<f64>,
    /// Sampling coefficient of variation when applicable.
    pub cov: Option<f64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub flags: Vec<String>,
}

/// A discrete node of the reduced network.
#[derive(Debug, Clone, PartialEq)]
pub struct RbnNode {
    pub label: String,
    pub states: Vec<String>,
    pub numeric: Vec<f64>,
    /// Parent positions within the model, declaration order.
    pub parents: Vec<usize>,
    /// Conditional table with scope parents + self (child axis last).
    pub potential: Potential,
}

/// The reduced, discrete-only network.
#[derive(Debug, Clone)]
pub struct RbnModel {
    pub nodes: Vec<RbnNode>,
    pub provenance: Vec<CellProvenance>,
}

impl RbnModel {
    pub fn by_label(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == label)
    }

    pub fn node(&self, idx: usize) -> &RbnNode {
        &self.nodes[idx]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Outcome of one solved cell.
#[derive(Debug, Clone)]
struct CellResult {
    p: f64,
    backend: String,
    beta: Option<f64>,
    cov: Option<f64>,
    n: Option<u64>,
    seed: u64,
    flags: Vec<String>,
}

fn solve_job(job: &SrmJob, config: &CompileConfig, seed: u64) -> Result<CellResult, SrmError> {
    let mc_policy = McPolicy::TargetCov {
        target: config.target_cov,
        n_max: config.mc_cap,
    };
    let attempt_form = matches!(config.backend, BackendChoice::Form) && job.component;
    if attempt_form {
        match form_component(&job.problem, FormOptions::default()) {
            Ok(r) if r.converged => {
                return Ok(CellResult {
                    p: r.p,
                    backend: "form".into(),
                    beta: Some(r.beta),
                    cov: None,
                    n: None,
                    seed,
                    flags: Vec::new(),
                });
            }
            _ => {} // fall through to sampling with a note
        }
    }
    if matches!(config.backend, BackendChoice::Is) {
        let center = {
            let mut prepared = PreparedProblem::new(&job.problem)?;
            crate::srm::form::form_iterate(&mut prepared, FormOptions::default())
        };
        if let Ok(r) = center {
            if r.converged && r.u_star.iter().all(|v| v.is_finite()) {
                let est = is_probability(&job.problem, &r.u_star, config.is_n, seed)?;
                return Ok(CellResult {
                    p: est.p,
                    backend: "is".into(),
                    beta: Some(r.beta),
                    cov: est.cov,
                    n: Some(est.n),
                    seed,
                    flags: if est.cov.is_none() {
                        vec!["zero-hits".into()]
                    } else {
                        Vec::new()
                    },
                });
            }
        }
    }
    let est = mc_probability(&job.problem, mc_policy, seed)?;
    let mut flags = Vec::new();
    if attempt_form {
        flags.push("form-fallback".into());
    }
    if matches!(config.backend, BackendChoice::Is) {
        flags.push("is-fallback".into());
    }
    if est.cov.is_none() {
        flags.push("zero-hits".into());
    }
    Ok(CellResult {
        p: est.p,
        backend: "mc".into(),
        beta: None,
        cov: est.cov,
        n: Some(est.n),
        seed,
        flags,
    })
}

fn cell_labels(graph: &EbnGraph, cell: &[(NodeId, usize)]) -> Vec<(String, String)> {
    cell.iter()
        .map(|&(id, s)| {
            let d = graph.discrete(id).unwrap();
            (d.label.clone(), d.states[s].clone())
        })
        .collect()
}

/// Joint cell probabilities of one envelope, conditional on the
/// conditioning variables: scope is conditioning ++ chain (both in
/// their plan order).
fn assemble_envelope_joint(
    graph: &EbnGraph,
    env: &EnvelopePlan,
    env_idx: usize,
    results: &HashMap<u64, CellResult>,
    jobs: &[SrmJob],
    provenance: &mut Vec<CellProvenance>,
) -> Result<Vec<f64>, CompileError> {
    let cond_cards: Vec<usize> = env
        .conditioning
        .iter()
        .map(|&id| graph.discrete(id).unwrap().n_states())
        .collect();
    let chain_cards: Vec<usize> = env
        .chain
        .iter()
        .map(|&id| graph.discrete(id).unwrap().n_states())
        .collect();

    // Level tables, built up by prefix depth. Level 0 is the constant 1
    // per conditioning configuration. A parallel table of standard
    // errors scales the negative-residue guard: clipping absorbs
    // sampling noise, gross inconsistencies abort.
    let mut prev: Vec<f64> = vec![1.0; radix::config_count(&cond_cards)];
    let mut prev_se: Vec<f64> = vec![0.0; prev.len()];
    let mut current = prev.clone();
    for level in 1..=env.chain.len() {
        let m = chain_cards[level - 1];
        let mut vars_cards = cond_cards.clone();
        vars_cards.extend_from_slice(&chain_cards[..level]);
        current = vec![0.0; radix::config_count(&vars_cards)];
        let mut current_se = vec![0.0; current.len()];

        // solved cells
        for job in jobs
            .iter()
            .filter(|j| j.envelope == env_idx && j.level == level)
        {
            let states: Vec<usize> = job.cell.iter().map(|&(_, s)| s).collect();
            let idx = radix::config_index(&vars_cards, &states);
            let r = &results[&job.index];
            current[idx] = r.p;
            current_se[idx] = r.cov.map(|c| c * r.p).unwrap_or(0.0);
            provenance.push(CellProvenance {
                envelope: env_idx,
                level,
                cell: cell_labels(graph, &job.cell),
                backend: r.backend.clone(),
                p: r.p,
                beta: r.beta,
                cov: r.cov,
                n: r.n,
                seed: Some(r.seed),
                flags: r.flags.clone(),
            });
        }

        // complement cells: the last state of the level's chain member
        for prefix_idx in 0..prev.len() {
            let mut states =
                radix::config_unrank(&vars_cards[..vars_cards.len() - 1], prefix_idx);
            let mut sum = 0.0;
            let mut var = prev_se[prefix_idx] * prev_se[prefix_idx];
            for s in 0..m - 1 {
                let mut full = states.clone();
                full.push(s);
                let i = radix::config_index(&vars_cards, &full);
                sum += current[i];
                var += current_se[i] * current_se[i];
            }
            let residue = prev[prefix_idx] - sum;
            let guard = (3.0 * var.sqrt()).max(1e-3);
            states.push(m - 1);
            let idx = radix::config_index(&vars_cards, &states);
            let cell: Vec<(NodeId, usize)> = env
                .conditioning
                .iter()
                .chain(env.chain[..level].iter())
                .copied()
                .zip(states.iter().copied())
                .collect();
            let mut flags = Vec::new();
            let value = if residue < -guard {
                return Err(CompileError::NegativeResidue {
                    cell: format!("{:?}", cell_labels(graph, &cell)),
                    value: residue,
                });
            } else if residue < 0.0 {
                flags.push("clipped".into());
                0.0
            } else {
                residue
            };
            current[idx] = value;
            current_se[idx] = var.sqrt();
            provenance.push(CellProvenance {
                envelope: env_idx,
                level,
                cell: cell_labels(graph, &cell),
                backend: "complement".into(),
                p: value,
                beta: None,
                cov: None,
                n: None,
                seed: None,
                flags,
            });
        }
        prev = current.clone();
        prev_se = current_se;
    }
    Ok(current)
}

/// Splits the envelope joint into one conditional potential per chain
/// member along the chain order, collapsing each onto its reduced
/// parent set. The split conditionals multiply back to the joint
/// exactly.
pub fn factorize_joint(
    graph: &EbnGraph,
    env: &EnvelopePlan,
    joint: &[f64],
    resulting_parents: &std::collections::BTreeMap<NodeId, BTreeSet<NodeId>>,
    rbn_index: &HashMap<NodeId, usize>,
) -> Result<Vec<(NodeId, Potential)>, CompileError> {
    let all_vars: Vec<NodeId> = env
        .conditioning
        .iter()
        .chain(env.chain.iter())
        .copied()
        .collect();
    let cards: Vec<usize> = all_vars
        .iter()
        .map(|&id| graph.discrete(id).unwrap().n_states())
        .collect();
    if joint.len() != radix::config_count(&cards) {
        return Err(CompileError::Factorization(format!(
            "joint table has {} entries for a {}-cell scope",
            joint.len(),
            radix::config_count(&cards)
        )));
    }

    // tables[k] = joint marginalized onto cond + chain[..=k]
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(env.chain.len());
    tables.push(joint.to_vec());
    for k in (1..env.chain.len()).rev() {
        let upper = tables.last().unwrap();
        let m = cards[env.conditioning.len() + k];
        let mut lower = vec![0.0; upper.len() / m];
        for (i, chunk) in upper.chunks(m).enumerate() {
            lower[i] = chunk.iter().sum();
        }
        tables.push(lower);
    }
    tables.reverse();

    let mut out = Vec::new();
    for (k, &node) in env.chain.iter().enumerate() {
        let m = cards[env.conditioning.len() + k];
        let numer = &tables[k];
        let denom: Vec<f64> = if k == 0 {
            vec![1.0; numer.len() / m]
        } else {
            tables[k - 1].clone()
        };
        let mut cond_table = vec![0.0; numer.len()];
        for (i, chunk) in numer.chunks(m).enumerate() {
            let d = denom[i];
            if d > 0.0 {
                for (s, &v) in chunk.iter().enumerate() {
                    cond_table[i * m + s] = v / d;
                }
            } else {
                // unreachable conditioning cell: any proper distribution
                // is admissible, take the least informative
                for s in 0..m {
                    cond_table[i * m + s] = 1.0 / m as f64;
                }
            }
        }

        // Collapse onto the reduced parent set.
        let full_scope: Vec<NodeId> = all_vars[..env.conditioning.len() + k]
            .iter()
            .chain(std::iter::once(&node))
            .copied()
            .collect();
        let want: BTreeSet<NodeId> = resulting_parents.get(&node).cloned().unwrap_or_default();
        let keep: Vec<bool> = full_scope
            .iter()
            .map(|&v| v == node || want.contains(&v))
            .collect();
        let full_cards: Vec<usize> = full_scope
            .iter()
            .map(|&id| graph.discrete(id).unwrap().n_states())
            .collect();
        let collapsed =
            collapse_constant_axes(&cond_table, &full_cards, &keep).map_err(|worst| {
                CompileError::Factorization(format!(
                    "`{}` is not conditionally independent of dropped scope \
                     variables (spread {worst:.2e}); deduplication failed",
                    graph.label(node)
                ))
            })?;

        let kept_vars: Vec<NodeId> = full_scope
            .iter()
            .zip(&keep)
            .filter(|(_, &keep)| keep)
            .map(|(&v, _)| v)
            .collect();
        let scope: Vec<usize> = kept_vars.iter().map(|v| rbn_index[v]).collect();
        let kept_cards: Vec<usize> = kept_vars
            .iter()
            .map(|&id| graph.discrete(id).unwrap().n_states())
            .collect();
        out.push((node, Potential::new(scope, kept_cards, collapsed)));
    }
    Ok(out)
}

/// Removes axes along which the table is constant (within tolerance),
/// keeping the first-seen value. Errors with the observed spread when a
/// dropped axis is not constant.
fn collapse_constant_axes(table: &[f64], cards: &[usize], keep: &[bool]) -> Result<Vec<f64>, f64> {
    let kept_cards: Vec<usize> = cards
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(&c, _)| c)
        .collect();
    let mut out = vec![f64::NAN; radix::config_count(&kept_cards)];
    let mut worst: f64 = 0.0;
    let mut states = vec![0usize; cards.len()];
    let mut kept_states = Vec::with_capacity(kept_cards.len());
    for (idx, &v) in table.iter().enumerate() {
        radix::unrank_into(cards, idx, &mut states);
        kept_states.clear();
        kept_states.extend(
            states
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&s, _)| s),
        );
        let kidx = radix::config_index(&kept_cards, &kept_states);
        if out[kidx].is_nan() {
            out[kidx] = v;
        } else {
            worst = worst.max((out[kidx] - v).abs());
        }
    }
    if worst > 1e-9 {
        return Err(worst);
    }
    Ok(out)
}

/// Tabulates the local model of a discrete node with no continuous
/// parent (the untouched part of the network).
fn tabulate_local_model(graph: &EbnGraph, id: NodeId) -> Result<Vec<f64>, CompileError> {
    let d = graph.discrete(id).unwrap();
    let m = d.n_states();
    let dparents = graph.discrete_parents(id);
    let cards = graph.parent_cards(id);
    let n_cfg = radix::config_count(&cards);
    match &d.kind {
        DiscreteKind::Cpt { table } => {
            if table.len() != n_cfg * m {
                return Err(CompileError::LocalModel(
                    d.label.clone(),
                    "table shape mismatch".into(),
                ));
            }
            Ok(table.clone())
        }
        DiscreteKind::Pmf { exprs } => {
            let mut out = vec![0.0; n_cfg * m];
            for cfg in 0..n_cfg {
                let states = radix::config_unrank(&cards, cfg);
                let mut bindings = HashMap::new();
                for (pos, &p) in dparents.iter().enumerate() {
                    let pd = graph.discrete(p).unwrap();
                    bindings.insert(pd.label.clone(), pd.numeric[states[pos]]);
                }
                let mut sum = 0.0;
                for (s, e) in exprs.iter().enumerate() {
                    let v = crate::lsf::eval_expr(e, &bindings)
                        .map_err(|e| CompileError::LocalModel(d.label.clone(), e.to_string()))?;
                    if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                        return Err(CompileError::LocalModel(
                            d.label.clone(),
                            format!("PMF value {v} outside [0, 1]"),
                        ));
                    }
                    out[cfg * m + s] = v.clamp(0.0, 1.0);
                    sum += v;
                }
                if exprs.len() == m - 1 {
                    if sum > 1.0 + 1e-6 {
                        return Err(CompileError::LocalModel(
                            d.label.clone(),
                            format!("PMF sums to {sum} > 1"),
                        ));
                    }
                    out[cfg * m + m - 1] = (1.0 - sum).clamp(0.0, 1.0);
                } else if (sum - 1.0).abs() > 1e-6 {
                    return Err(CompileError::LocalModel(
                        d.label.clone(),
                        format!("PMF sums to {sum}, not 1"),
                    ));
                }
            }
            Ok(out)
        }
        DiscreteKind::DomainDet(form) => {
            // Domains over discrete parent codes only: a deterministic
            // one-hot table.
            let mut out = vec![0.0; n_cfg * m];
            for cfg in 0..n_cfg {
                let states = radix::config_unrank(&cards, cfg);
                let mut bindings = HashMap::new();
                for (pos, &p) in dparents.iter().enumerate() {
                    let pd = graph.discrete(p).unwrap();
                    bindings.insert(pd.label.clone(), pd.numeric[states[pos]]);
                }
                let state = match form {
                    crate::model::DomainForm::Threshold { g, cuts } => {
                        let v = crate::lsf::eval_expr(g, &bindings).map_err(|e| {
                            CompileError::LocalModel(d.label.clone(), e.to_string())
                        })?;
                        crate::model::DiscreteNode::threshold_state(cuts, v)
                    }
                    crate::model::DomainForm::General { rules } => {
                        let mut found = None;
                        for s in 0..m {
                            let rule = crate::model::resolve_domain_rule(graph, id, rules, s, cfg)
                                .map_err(|e| CompileError::LocalModel(d.label.clone(), e))?
                                .ok_or_else(|| {
                                    CompileError::LocalModel(
                                        d.label.clone(),
                                        format!("no domain for state {s}"),
                                    )
                                })?;
                            let inside = rule.domain.contains(&bindings).map_err(|e| {
                                CompileError::LocalModel(d.label.clone(), e.to_string())
                            })?;
                            if inside {
                                found = Some(s);
                                break;
                            }
                        }
                        found.ok_or_else(|| {
                            CompileError::LocalModel(
                                d.label.clone(),
                                "no state domain matched".into(),
                            )
                        })?
                    }
                };
                out[cfg * m + state] = 1.0;
            }
            Ok(out)
        }
        DiscreteKind::Pending => Err(CompileError::LocalModel(
            d.label.clone(),
            "pending local model outside any envelope".into(),
        )),
    }
}

/// Compiles the hybrid graph into the reduced discrete network.
pub fn compile(
    graph: &EbnGraph,
    plan: &EliminationPlan,
    config: &CompileConfig,
) -> Result<RbnModel, CompileError> {
    let jobs = enumerate_jobs(graph, plan, config.override_envelope_guard)?;

    // Solve distinct fingerprints once, in parallel. The seed of a
    // fingerprint's first job keys the solve, so results depend only on
    // (base seed, enumeration order), never on scheduling.
    let mut first_of: HashMap<u64, u64> = HashMap::new();
    let mut representatives: Vec<&SrmJob> = Vec::new();
    for job in &jobs {
        if !first_of.contains_key(&job.fingerprint) {
            first_of.insert(job.fingerprint, job.index);
            representatives.push(job);
        }
    }
    let solved: Vec<(u64, Result<CellResult, SrmError>)> = representatives
        .par_iter()
        .map(|job| {
            let seed = derive_seed(config.base_seed, job.index);
            (job.fingerprint, solve_job(job, config, seed))
        })
        .collect();

    let mut by_fingerprint: HashMap<u64, CellResult> = HashMap::new();
    let mut failures: Vec<String> = Vec::new();
    for (fp, result) in solved {
        match result {
            Ok(r) => {
                by_fingerprint.insert(fp, r);
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    if failures.len() > config.max_failures {
        return Err(CompileError::TooManyFailures {
            failures: failures.len(),
            threshold: config.max_failures,
            first: failures[0].clone(),
        });
    }
    let mut results: HashMap<u64, CellResult> = HashMap::new();
    for job in &jobs {
        if let Some(r) = by_fingerprint.get(&job.fingerprint) {
            let mut r = r.clone();
            if first_of[&job.fingerprint] != job.index {
                r.flags.push("deduplicated".into());
            }
            results.insert(job.index, r);
        } else {
            // failed cell under a raised threshold: zero with a flag
            results.insert(
                job.index,
                CellResult {
                    p: 0.0,
                    backend: "failed".into(),
                    beta: None,
                    cov: None,
                    n: None,
                    seed: derive_seed(config.base_seed, job.index),
                    flags: vec!["solve-failed".into()],
                },
            );
        }
    }

    let rbn_ids: Vec<NodeId> = graph
        .node_ids()
        .filter(|&id| graph.node(id).is_discrete())
        .collect();
    let rbn_index: HashMap<NodeId, usize> =
        rbn_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let chain_members: BTreeSet<NodeId> = plan
        .envelopes
        .iter()
        .flat_map(|e| e.chain.iter().copied())
        .collect();

    let mut potentials: HashMap<NodeId, Potential> = HashMap::new();
    let mut provenance = Vec::new();

    for (env_idx, env) in plan.envelopes.iter().enumerate() {
        if env.chain.is_empty() {
            continue;
        }
        let joint = assemble_envelope_joint(graph, env, env_idx, &results, &jobs, &mut provenance)?;
        let factors = factorize_joint(graph, env, &joint, &plan.resulting_parents, &rbn_index)?;
        for (node, mut potential) in factors {
            potential.normalize_last_axis();
            potentials.insert(node, potential);
        }
    }

    let mut nodes = Vec::with_capacity(rbn_ids.len());
    for &id in &rbn_ids {
        let d = graph.discrete(id).unwrap();
        let potential = match potentials.remove(&id) {
            Some(p) => p,
            None => {
                if chain_members.contains(&id) {
                    return Err(CompileError::Internal(format!(
                        "chain member `{}` received no potential",
                        d.label
                    )));
                }
                // untouched node: same conditional table as in the input
                let table = tabulate_local_model(graph, id)?;
                let mut scope: Vec<usize> = graph
                    .discrete_parents(id)
                    .iter()
                    .map(|p| rbn_index[p])
                    .collect();
                let mut cards = graph.parent_cards(id);
                scope.push(rbn_index[&id]);
                cards.push(d.n_states());
                Potential::new(scope, cards, table)
            }
        };
        // The potential's scope must equal the planned parent set + self.
        let planned: BTreeSet<usize> = plan
            .resulting_parents
            .get(&id)
            .map(|ps| ps.iter().map(|p| rbn_index[p]).collect())
            .unwrap_or_default();
        let scope_set: BTreeSet<usize> = potential.scope.iter().copied().collect();
        let mut expected = planned.clone();
        expected.insert(rbn_index[&id]);
        if scope_set != expected {
            return Err(CompileError::Internal(format!(
                "`{}` potential scope {:?} does not match the plan {:?}",
                d.label, scope_set, expected
            )));
        }
        // Child-last layout with parents in declaration order.
        let mut order: Vec<usize> = potential
            .scope
            .iter()
            .copied()
            .filter(|&v| v != rbn_index[&id])
            .collect();
        order.sort_unstable();
        order.push(rbn_index[&id]);
        let potential = potential.permute(&order);

        nodes.push(RbnNode {
            label: d.label.clone(),
            states: d.states.clone(),
            numeric: d.numeric.clone(),
            parents: order[..order.len() - 1].to_vec(),
            potential,
        });
    }

    Ok(RbnModel { nodes, provenance })
}

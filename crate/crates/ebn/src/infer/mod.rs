//! Exact inference on the reduced network by variable elimination.
//!
//! Queries first prune barren factors (childless non-query nodes sum
//! out to one) and split the evidence-restricted factor graph into
//! connected components. Factors d-separated from the targets land in
//! foreign components and never touch the target computation, so
//! irrelevant evidence leaves posteriors bit-identical. Each
//! elimination step rescales its factor with the log of the scale
//! accumulated into the evidence probability, keeping rare-event chains
//! inside double range.

use crate::compile::{Potential, RbnModel};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("unknown node index {0}")]
    UnknownNode(usize),
    #[error("node `{0}` has no state `{1}`")]
    UnknownState(String, String),
    #[error("evidence has probability zero; the observations contradict the model")]
    ZeroProbabilityEvidence,
    #[error("targets must be nonempty and disjoint from the evidence")]
    BadQuery,
    #[error("joint scope of {entries} entries exceeds the memory bound of {bound}")]
    MemoryBound { entries: usize, bound: usize },
    #[error("elimination order misses variable {0}")]
    IncompleteOrder(usize),
}

/// Observed states by node index.
pub type Evidence = BTreeMap<usize, usize>;

/// Resolves (label, state label) pairs against the model.
pub fn evidence_from_labels(
    model: &RbnModel,
    pairs: &[(String, String)],
) -> Result<Evidence, InferError> {
    let mut out = Evidence::new();
    for (label, state) in pairs {
        let idx = model
            .by_label(label)
            .ok_or_else(|| InferError::UnknownState(label.clone(), state.clone()))?;
        let s = model.nodes[idx]
            .states
            .iter()
            .position(|x| x == state)
            .ok_or_else(|| InferError::UnknownState(label.clone(), state.clone()))?;
        out.insert(idx, s);
    }
    Ok(out)
}

/// Elimination-order heuristic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Heuristic {
    MinFill,
    MinDegree,
    /// Explicit order over the eliminated variables.
    Given(Vec<usize>),
}

#[derive(Debug, Clone, Default)]
pub struct QueryStats {
    /// Largest potential handled, in table entries (initial conditional
    /// tables included).
    pub max_potential_entries: usize,
    pub elimination_order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PosteriorResult {
    /// Queried variables in ascending index order.
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    /// Normalized joint posterior over the scope.
    pub table: Vec<f64>,
    /// Pr(evidence) under the model.
    pub evidence_probability: f64,
    pub stats: QueryStats,
}

impl PosteriorResult {
    /// Marginal over a single scope variable.
    pub fn marginal(&self, var: usize) -> Vec<f64> {
        let p = Potential::new(self.scope.clone(), self.cards.clone(), self.table.clone());
        let mut reduced = p;
        for &v in self.scope.clone().iter().filter(|&&v| v != var) {
            reduced = reduced.sum_out(v);
        }
        reduced.table
    }
}

/// Posterior over `targets` given `evidence`.
pub fn query(
    model: &RbnModel,
    targets: &BTreeSet<usize>,
    evidence: &Evidence,
    heuristic: &Heuristic,
) -> Result<PosteriorResult, InferError> {
    run_query(model, targets, evidence, heuristic, usize::MAX)
}

/// Joint posterior over an explicitly ordered scope, subject to a
/// memory bound on the joint table.
pub fn joint_query(
    model: &RbnModel,
    scope: &[usize],
    evidence: &Evidence,
    heuristic: &Heuristic,
    memory_bound: usize,
) -> Result<PosteriorResult, InferError> {
    let targets: BTreeSet<usize> = scope.iter().copied().collect();
    if targets.len() != scope.len() {
        return Err(InferError::BadQuery);
    }
    let entries: usize = scope
        .iter()
        .map(|&v| {
            model
                .nodes
                .get(v)
                .map(|n| n.states.len())
                .ok_or(InferError::UnknownNode(v))
        })
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .product();
    if entries > memory_bound {
        return Err(InferError::MemoryBound {
            entries,
            bound: memory_bound,
        });
    }
    let mut result = run_query(model, &targets, evidence, heuristic, memory_bound)?;
    // Present the table in the requested order.
    let p = Potential::new(result.scope.clone(), result.cards.clone(), result.table);
    let p = p.permute(scope);
    result.scope = p.scope.clone();
    result.cards = p.cards.clone();
    result.table = p.table;
    Ok(result)
}

fn run_query(
    model: &RbnModel,
    targets: &BTreeSet<usize>,
    evidence: &Evidence,
    heuristic: &Heuristic,
    _memory_bound: usize,
) -> Result<PosteriorResult, InferError> {
    if targets.is_empty() {
        return Err(InferError::BadQuery);
    }
    for &t in targets.iter().chain(evidence.keys()) {
        if t >= model.len() {
            return Err(InferError::UnknownNode(t));
        }
    }
    for (&e, &s) in evidence {
        if targets.contains(&e) {
            return Err(InferError::BadQuery);
        }
        if s >= model.nodes[e].states.len() {
            return Err(InferError::UnknownState(
                model.nodes[e].label.clone(),
                format!("index {s}"),
            ));
        }
    }

    let mut stats = QueryStats::default();

    // Factors by owner node, with barren pruning: a node outside the
    // query whose variable appears in no other factor sums out to one.
    let mut active: BTreeMap<usize, Potential> = model
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n.potential.clone()))
        .collect();
    loop {
        let mut appears_elsewhere: BTreeSet<usize> = BTreeSet::new();
        for (&owner, factor) in &active {
            for &v in &factor.scope {
                if v != owner {
                    appears_elsewhere.insert(v);
                }
            }
        }
        let barren: Vec<usize> = active
            .keys()
            .copied()
            .filter(|v| {
                !targets.contains(v)
                    && !evidence.contains_key(v)
                    && !appears_elsewhere.contains(v)
            })
            .collect();
        if barren.is_empty() {
            break;
        }
        for v in barren {
            active.remove(&v);
        }
    }

    for factor in active.values() {
        stats.max_potential_entries = stats.max_potential_entries.max(factor.len());
    }

    // Restrict by evidence.
    let mut factors: Vec<Potential> = Vec::with_capacity(active.len());
    for (_, mut factor) in active {
        for (&e, &s) in evidence {
            if factor.scope.contains(&e) {
                factor = factor.restrict(e, s);
            }
        }
        factors.push(factor);
    }

    // Connected components over shared variables.
    let components = split_components(&factors);

    let mut log_scale = 0.0f64;
    let mut posterior: Option<Potential> = None;
    let mut evidence_prob = 1.0f64;

    for comp in components {
        let comp_vars: BTreeSet<usize> =
            comp.iter().flat_map(|f| f.scope.iter().copied()).collect();
        let comp_targets: BTreeSet<usize> =
            comp_vars.intersection(targets).copied().collect();
        let eliminate: Vec<usize> = comp_vars
            .iter()
            .copied()
            .filter(|v| !comp_targets.contains(v))
            .collect();
        let (result, comp_log, order) =
            eliminate_all(comp, &eliminate, heuristic, &mut stats)?;
        stats.elimination_order.extend(order);
        let total = result.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(InferError::ZeroProbabilityEvidence);
        }
        log_scale += comp_log;
        evidence_prob *= total;
        if !comp_targets.is_empty() {
            let mut normalized = result;
            for v in normalized.table.iter_mut() {
                *v /= total;
            }
            posterior = Some(match posterior {
                None => normalized,
                Some(p) => p.multiply(&normalized),
            });
        }
    }

    let evidence_probability = (evidence_prob.ln() + log_scale).exp();
    if !(evidence_probability > 0.0) {
        return Err(InferError::ZeroProbabilityEvidence);
    }

    let posterior = match posterior {
        Some(p) => p,
        None => return Err(InferError::BadQuery),
    };
    // Scope is sorted by construction of multiply; make sure.
    debug_assert!(posterior.scope.windows(2).all(|w| w[0] < w[1]));
    Ok(PosteriorResult {
        scope: posterior.scope.clone(),
        cards: posterior.cards.clone(),
        table: posterior.table,
        evidence_probability: evidence_probability.min(1.0),
        stats,
    })
}

/// Splits factors into connected components linked by shared variables.
fn split_components(factors: &[Potential]) -> Vec<Vec<Potential>> {
    let n = factors.len();
    let mut assigned = vec![usize::MAX; n];
    let mut components: Vec<Vec<Potential>> = Vec::new();
    for start in 0..n {
        if assigned[start] != usize::MAX {
            continue;
        }
        let comp_idx = components.len();
        let mut queue = vec![start];
        let mut members = Vec::new();
        assigned[start] = comp_idx;
        while let Some(f) = queue.pop() {
            members.push(factors[f].clone());
            let vars: BTreeSet<usize> = factors[f].scope.iter().copied().collect();
            for other in 0..n {
                if assigned[other] != usize::MAX {
                    continue;
                }
                if factors[other].scope.iter().any(|v| vars.contains(v)) {
                    assigned[other] = comp_idx;
                    queue.push(other);
                }
            }
        }
        components.push(members);
    }
    components
}

/// Eliminates `eliminate` from the factor list in heuristic order,
/// rescaling after every step; returns the product of what remains, the
/// accumulated log scale, and the order used.
fn eliminate_all(
    mut factors: Vec<Potential>,
    eliminate: &[usize],
    heuristic: &Heuristic,
    stats: &mut QueryStats,
) -> Result<(Potential, f64, Vec<usize>), InferError> {
    let mut remaining: BTreeSet<usize> = eliminate.iter().copied().collect();
    let mut log_scale = 0.0f64;
    let mut order_used = Vec::new();
    let mut given_iter: Vec<usize> = match heuristic {
        Heuristic::Given(order) => order.clone(),
        _ => Vec::new(),
    };

    while !remaining.is_empty() {
        let var = match heuristic {
            Heuristic::Given(_) => {
                let mut next = None;
                while let Some(candidate) = given_iter.first().copied() {
                    given_iter.remove(0);
                    if remaining.contains(&candidate) {
                        next = Some(candidate);
                        break;
                    }
                }
                next.ok_or_else(|| {
                    InferError::IncompleteOrder(*remaining.iter().next().unwrap())
                })?
            }
            Heuristic::MinDegree => pick_min_degree(&factors, &remaining),
            Heuristic::MinFill => pick_min_fill(&factors, &remaining),
        };
        remaining.remove(&var);
        order_used.push(var);

        let (touching, rest): (Vec<Potential>, Vec<Potential>) = factors
            .into_iter()
            .partition(|f| f.scope.contains(&var));
        let mut product = Potential::unit();
        for f in touching {
            product = product.multiply(&f);
            stats.max_potential_entries = stats.max_potential_entries.max(product.len());
        }
        let mut summed = product.sum_out(var);
        // rescale to keep chained small probabilities in range
        let s: f64 = summed.table.iter().sum();
        if s > 0.0 && s.is_finite() {
            for v in summed.table.iter_mut() {
                *v /= s;
            }
            log_scale += s.ln();
        }
        factors = rest;
        factors.push(summed);
    }

    let mut product = Potential::unit();
    for f in factors {
        product = product.multiply(&f);
        stats.max_potential_entries = stats.max_potential_entries.max(product.len());
    }
    Ok((product, log_scale, order_used))
}

fn neighbors(factors: &[Potential], var: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for f in factors {
        if f.scope.contains(&var) {
            out.extend(f.scope.iter().copied().filter(|&v| v != var));
        }
    }
    out
}

fn pick_min_degree(factors: &[Potential], remaining: &BTreeSet<usize>) -> usize {
    remaining
        .iter()
        .copied()
        .min_by_key(|&v| (neighbors(factors, v).len(), v))
        .expect("nonempty")
}

fn pick_min_fill(factors: &[Potential], remaining: &BTreeSet<usize>) -> usize {
    remaining
        .iter()
        .copied()
        .min_by_key(|&v| {
            let nb: Vec<usize> = neighbors(factors, v).into_iter().collect();
            let mut fill = 0usize;
            for i in 0..nb.len() {
                for j in i + 1..nb.len() {
                    let connected = factors
                        .iter()
                        .any(|f| f.scope.contains(&nb[i]) && f.scope.contains(&nb[j]));
                    if !connected {
                        fill += 1;
                    }
                }
            }
            (fill, v)
        })
        .expect("nonempty")
}

/// Size metrics of a model under symbolic elimination: the largest
/// potential the heuristic would have to handle, the total stored table
/// entries, and per-node parent counts.
#[derive(Debug, Clone)]
pub struct ModelStats {
    pub max_potential_entries: usize,
    pub total_table_entries: usize,
    pub parent_counts: Vec<(String, usize)>,
}

pub fn model_stats(model: &RbnModel, heuristic: &Heuristic) -> ModelStats {
    let cards: Vec<usize> = model.nodes.iter().map(|n| n.states.len()).collect();
    let mut scopes: Vec<BTreeSet<usize>> = model
        .nodes
        .iter()
        .map(|n| n.potential.scope.iter().copied().collect())
        .collect();
    let mut max_entries: usize = scopes
        .iter()
        .map(|s| s.iter().map(|&v| cards[v]).product::<usize>())
        .max()
        .unwrap_or(0);
    let mut remaining: BTreeSet<usize> = (0..model.len()).collect();

    while !remaining.is_empty() {
        let var = match heuristic {
            Heuristic::MinDegree | Heuristic::Given(_) => {
                symbolic_pick(&scopes, &remaining, &cards, false)
            }
            Heuristic::MinFill => symbolic_pick(&scopes, &remaining, &cards, true),
        };
        remaining.remove(&var);
        let mut merged: BTreeSet<usize> = BTreeSet::new();
        scopes.retain(|s| {
            if s.contains(&var) {
                merged.extend(s.iter().copied());
                false
            } else {
                true
            }
        });
        let entries: usize = merged.iter().map(|&v| cards[v]).product();
        max_entries = max_entries.max(entries);
        merged.remove(&var);
        scopes.push(merged);
    }

    ModelStats {
        max_potential_entries: max_entries,
        total_table_entries: model.nodes.iter().map(|n| n.potential.len()).sum(),
        parent_counts: model
            .nodes
            .iter()
            .map(|n| (n.label.clone(), n.parents.len()))
            .collect(),
    }
}

fn symbolic_pick(
    scopes: &[BTreeSet<usize>],
    remaining: &BTreeSet<usize>,
    cards: &[usize],
    fill: bool,
) -> usize {
    let nb = |v: usize| -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for s in scopes {
            if s.contains(&v) {
                out.extend(s.iter().copied().filter(|&w| w != v));
            }
        }
        out
    };
    remaining
        .iter()
        .copied()
        .min_by_key(|&v| {
            if fill {
                let n: Vec<usize> = nb(v).into_iter().collect();
                let mut f = 0usize;
                for i in 0..n.len() {
                    for j in i + 1..n.len() {
                        if !scopes
                            .iter()
                            .any(|s| s.contains(&n[i]) && s.contains(&n[j]))
                        {
                            f += 1;
                        }
                    }
                }
                (f, v)
            } else {
                (nb(v).iter().map(|&w| cards[w]).product::<usize>(), v)
            }
        })
        .expect("nonempty")
}

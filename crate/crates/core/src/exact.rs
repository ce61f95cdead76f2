//! Ground-truth inference.
//!
//! [`exact_infer`] runs variable elimination in log space with a min-fill
//! order; node and factor marginals come from one extra elimination pass
//! per region, which is cheap at the model sizes this crate targets.
//! [`brute_force_infer`] enumerates every joint configuration and exists
//! to validate the eliminator.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{FactorGraph, LogPotentials};
use crate::real::Real;
use crate::tables::{self, OnlineLse};

/// Largest intermediate table variable elimination may build.
const MAX_ELIMINATION_TABLE: usize = 1 << 26;
/// Largest joint state space brute force will enumerate.
const MAX_BRUTE_FORCE_STATES: usize = 1 << 24;

/// Exact log-partition and marginals.
#[derive(Clone, Debug)]
pub struct ExactResult<T: Real = f64> {
    pub log_partition: T,
    pub node_marginals: Vec<Vec<T>>,
    pub factor_marginals: Vec<Vec<T>>,
}

/// A log-space factor over an ascending scope, last variable fastest.
#[derive(Clone, Debug)]
struct LogFactor<T> {
    scope: Vec<usize>,
    table: Vec<T>,
}

fn initial_factors<T: Real>(graph: &FactorGraph, pots: &LogPotentials<T>) -> Vec<LogFactor<T>> {
    let mut fs = Vec::with_capacity(graph.num_vars() + graph.num_factors());
    for i in 0..graph.num_vars() {
        fs.push(LogFactor {
            scope: vec![i],
            table: pots.node_table(i).to_vec(),
        });
    }
    for a in 0..graph.num_factors() {
        fs.push(LogFactor {
            scope: graph.scope(a).to_vec(),
            table: pots.factor_table(a).to_vec(),
        });
    }
    fs
}

/// Sums the given factors onto their union scope (log-space product).
fn product<T: Real>(factors: &[LogFactor<T>], cards: &[usize]) -> Result<LogFactor<T>> {
    let mut scope_set: BTreeSet<usize> = BTreeSet::new();
    for f in factors {
        scope_set.extend(f.scope.iter().copied());
    }
    let scope: Vec<usize> = scope_set.into_iter().collect();
    let scope_cards: Vec<usize> = scope.iter().map(|&i| cards[i]).collect();
    let len = tables::table_len(&scope_cards);
    if len > MAX_ELIMINATION_TABLE {
        return Err(Error::TooLarge(format!(
            "intermediate table would have {len} entries (limit {MAX_ELIMINATION_TABLE})"
        )));
    }
    let mut table = vec![T::zero(); len];
    for f in factors {
        // Position of each scope variable of f inside the union scope.
        let positions: Vec<usize> = f
            .scope
            .iter()
            .map(|v| scope.binary_search(v).expect("scope is a superset"))
            .collect();
        let f_strides = tables::strides(&f.scope.iter().map(|&i| cards[i]).collect::<Vec<_>>());
        tables::for_each_assignment(&scope_cards, |state, lin| {
            let mut src = 0usize;
            for (k, &pos) in positions.iter().enumerate() {
                src += state[pos] * f_strides[k];
            }
            table[lin] += f.table[src];
        });
    }
    Ok(LogFactor { scope, table })
}

/// Log-sum-exp of one variable out of a factor.
fn marginalize_out<T: Real>(f: &LogFactor<T>, var: usize, cards: &[usize]) -> LogFactor<T> {
    let pos = f.scope.binary_search(&var).expect("var in scope");
    let new_scope: Vec<usize> = f.scope.iter().copied().filter(|&v| v != var).collect();
    let old_cards: Vec<usize> = f.scope.iter().map(|&i| cards[i]).collect();
    let new_cards: Vec<usize> = new_scope.iter().map(|&i| cards[i]).collect();
    let new_strides = tables::strides(&new_cards);
    let mut acc: Vec<OnlineLse<T>> = (0..tables::table_len(&new_cards))
        .map(|_| OnlineLse::new())
        .collect();
    tables::for_each_assignment(&old_cards, |state, lin| {
        let mut dst = 0usize;
        let mut k = 0usize;
        for (j, &s) in state.iter().enumerate() {
            if j != pos {
                dst += s * new_strides[k];
                k += 1;
            }
        }
        acc[dst].push(f.table[lin]);
    });
    LogFactor {
        scope: new_scope,
        table: acc.into_iter().map(|a| a.value()).collect(),
    }
}

/// Min-fill order over `eliminate`, ties broken by lowest variable index.
fn min_fill_order(num_vars: usize, scopes: &[Vec<usize>], eliminate: &[bool]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_vars];
    for scope in scopes {
        for (k, &i) in scope.iter().enumerate() {
            for &j in &scope[k + 1..] {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    let mut remaining: BTreeSet<usize> = (0..num_vars).filter(|&i| eliminate[i]).collect();
    let mut alive: Vec<bool> = vec![true; num_vars];
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (fill, var)
        for &v in &remaining {
            let neigh: Vec<usize> = adj[v].iter().copied().filter(|&u| alive[u]).collect();
            let mut fill = 0usize;
            for (k, &a) in neigh.iter().enumerate() {
                for &b in &neigh[k + 1..] {
                    if !adj[a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            match best {
                None => best = Some((fill, v)),
                Some((bf, bv)) => {
                    if fill < bf || (fill == bf && v < bv) {
                        best = Some((fill, v));
                    }
                }
            }
        }
        let (_, v) = best.unwrap();
        let neigh: Vec<usize> = adj[v].iter().copied().filter(|&u| alive[u]).collect();
        for (k, &a) in neigh.iter().enumerate() {
            for &b in &neigh[k + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        alive[v] = false;
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// Eliminates `order` from the factor pool, in sequence.
fn eliminate<T: Real>(
    mut pool: Vec<LogFactor<T>>,
    order: &[usize],
    cards: &[usize],
) -> Result<Vec<LogFactor<T>>> {
    for &v in order {
        let (with_v, rest): (Vec<_>, Vec<_>) =
            pool.into_iter().partition(|f| f.scope.contains(&v));
        pool = rest;
        if with_v.is_empty() {
            continue;
        }
        let prod = product(&with_v, cards)?;
        pool.push(marginalize_out(&prod, v, cards));
    }
    Ok(pool)
}

fn log_partition_of<T: Real>(
    graph: &FactorGraph,
    pots: &LogPotentials<T>,
    order: &[usize],
) -> Result<T> {
    let pool = eliminate(initial_factors(graph, pots), order, graph.cardinalities())?;
    let mut log_z = T::zero();
    for f in pool {
        debug_assert!(f.scope.is_empty());
        log_z += f.table[0];
    }
    Ok(log_z)
}

/// Log Z under a caller-chosen elimination order (must cover all
/// variables). Exposed so order invariance can be tested directly.
pub fn exact_log_partition_with_order<T: Real>(
    graph: &FactorGraph,
    pots: &LogPotentials<T>,
    order: &[usize],
) -> Result<T> {
    let mut seen = vec![false; graph.num_vars()];
    for &v in order {
        if v >= graph.num_vars() || seen[v] {
            return Err(Error::InvalidArgument(
                "elimination order must list every variable exactly once".into(),
            ));
        }
        seen[v] = true;
    }
    if !seen.into_iter().all(|b| b) {
        return Err(Error::InvalidArgument(
            "elimination order must cover all variables".into(),
        ));
    }
    log_partition_of(graph, pots, order)
}

/// Normalized linear-space marginal over an ascending target scope.
fn marginal_over<T: Real>(
    graph: &FactorGraph,
    pots: &LogPotentials<T>,
    targets: &[usize],
) -> Result<Vec<T>> {
    let eliminate_mask: Vec<bool> = (0..graph.num_vars())
        .map(|i| !targets.contains(&i))
        .collect();
    let scopes: Vec<Vec<usize>> = initial_factors(graph, pots)
        .iter()
        .map(|f| f.scope.clone())
        .collect();
    let order = min_fill_order(graph.num_vars(), &scopes, &eliminate_mask);
    let pool = eliminate(initial_factors(graph, pots), &order, graph.cardinalities())?;
    let joint = product(&pool, graph.cardinalities())?;
    debug_assert_eq!(joint.scope, targets);
    let mut table = joint.table;
    tables::normalize_log(&mut table);
    Ok(table.into_iter().map(|x| x.exp()).collect())
}

/// Exact inference by variable elimination (min-fill order, deterministic
/// tie-break by lowest index). All arithmetic is log-space.
pub fn exact_infer<T: Real>(graph: &FactorGraph, pots: &LogPotentials<T>) -> Result<ExactResult<T>> {
    let scopes: Vec<Vec<usize>> = graph.factors().to_vec();
    let order = min_fill_order(graph.num_vars(), &scopes, &vec![true; graph.num_vars()]);
    let log_partition = log_partition_of(graph, pots, &order)?;
    let mut node_marginals = Vec::with_capacity(graph.num_vars());
    for i in 0..graph.num_vars() {
        node_marginals.push(marginal_over(graph, pots, &[i])?);
    }
    let mut factor_marginals = Vec::with_capacity(graph.num_factors());
    for a in 0..graph.num_factors() {
        factor_marginals.push(marginal_over(graph, pots, graph.scope(a))?);
    }
    Ok(ExactResult {
        log_partition,
        node_marginals,
        factor_marginals,
    })
}

/// Exact inference by full enumeration. Guarded by the joint state count.
pub fn brute_force_infer<T: Real>(
    graph: &FactorGraph,
    pots: &LogPotentials<T>,
) -> Result<ExactResult<T>> {
    let total: usize = graph.cardinalities().iter().try_fold(1usize, |acc, &c| {
        acc.checked_mul(c).filter(|&v| v <= MAX_BRUTE_FORCE_STATES)
    })
    .ok_or_else(|| {
        Error::TooLarge(format!(
            "joint state count exceeds {MAX_BRUTE_FORCE_STATES} for brute force"
        ))
    })?;
    let _ = total;

    let factor_strides: Vec<Vec<usize>> = (0..graph.num_factors())
        .map(|a| tables::strides(&graph.factor_cards(a)))
        .collect();
    let log_weight = |state: &[usize]| -> T {
        let mut w = T::zero();
        for i in 0..graph.num_vars() {
            w += pots.node_table(i)[state[i]];
        }
        for a in 0..graph.num_factors() {
            let mut idx = 0usize;
            for (k, &i) in graph.scope(a).iter().enumerate() {
                idx += state[i] * factor_strides[a][k];
            }
            w += pots.factor_table(a)[idx];
        }
        w
    };

    let mut lse = OnlineLse::new();
    tables::for_each_assignment(graph.cardinalities(), |state, _| {
        lse.push(log_weight(state));
    });
    let log_partition = lse.value();

    let mut node_marginals: Vec<Vec<T>> = (0..graph.num_vars())
        .map(|i| vec![T::zero(); graph.cardinality(i)])
        .collect();
    let mut factor_marginals: Vec<Vec<T>> = (0..graph.num_factors())
        .map(|a| vec![T::zero(); graph.factor_states(a)])
        .collect();
    tables::for_each_assignment(graph.cardinalities(), |state, _| {
        let p = (log_weight(state) - log_partition).exp();
        for i in 0..graph.num_vars() {
            node_marginals[i][state[i]] += p;
        }
        for a in 0..graph.num_factors() {
            let mut idx = 0usize;
            for (k, &i) in graph.scope(a).iter().enumerate() {
                idx += state[i] * factor_strides[a][k];
            }
            factor_marginals[a][idx] += p;
        }
    });
    Ok(ExactResult {
        log_partition,
        node_marginals,
        factor_marginals,
    })
}

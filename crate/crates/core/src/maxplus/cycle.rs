//! Maximum cycle mean: Karp's characterization and Howard policy iteration.

#![allow(clippy::needless_range_loop)]

use super::{MaxPlusError, MaxPlusMatrix};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct CycleTimeResult<T> {
    /// Maximum cycle mean (time per event of every node).
    pub growth_rate: T,
    /// Nodes of one cycle achieving it, in arc order (`x[c1] >= A[c1][c0] + x[c0]`, ...).
    pub critical_cycle: Vec<usize>,
}

fn require_strongly_connected<T: Scalar>(a: &MaxPlusMatrix<T>) -> Result<(), MaxPlusError> {
    if a.is_strongly_connected() && a.arcs().next().is_some() {
        Ok(())
    } else {
        Err(MaxPlusError::NotStronglyConnected)
    }
}

/// Karp: `max_v min_k (D_n(v) - D_k(v)) / (n - k)` over walks from node 0.
pub fn karp<T: Scalar>(a: &MaxPlusMatrix<T>) -> Result<T, MaxPlusError> {
    require_strongly_connected(a)?;
    let n = a.dim();
    let mut d: Vec<Vec<Option<T>>> = Vec::with_capacity(n + 1);
    let mut first = vec![None; n];
    first[0] = Some(T::zero());
    d.push(first);
    for k in 1..=n {
        let row = a.apply(&d[k - 1])?;
        d.push(row);
    }
    let mut best: Option<T> = None;
    for v in 0..n {
        let Some(dn) = d[n][v] else { continue };
        let worst = (0..n)
            .filter_map(|k| d[k][v].map(|dk| (dn - dk) / T::of_usize(n - k)))
            .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |m| m.min(x))));
        if let Some(w) = worst {
            best = Some(best.map_or(w, |b| b.max(w)));
        }
    }
    best.ok_or(MaxPlusError::NotStronglyConnected)
}

/// Howard policy iteration for an irreducible matrix.
pub fn howard<T: Scalar>(a: &MaxPlusMatrix<T>) -> Result<T, MaxPlusError> {
    require_strongly_connected(a)?;
    let n = a.dim();
    let tol = tolerance(a);
    // policy: for each row, the column achieving the row maximum
    let mut policy: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| a.get(i, j).map(|w| (j, w)))
                .fold(None, |acc: Option<(usize, T)>, (j, w)| match acc {
                    Some((_, bw)) if bw >= w => acc,
                    _ => Some((j, w)),
                })
                .expect("irreducible rows are not empty")
                .0
        })
        .collect();
    let mut eta = vec![T::zero(); n];
    let mut bias = vec![T::zero(); n];

    const MAX_ITER: usize = 10_000;
    for _ in 0..MAX_ITER {
        evaluate_policy(a, &policy, &mut eta, &mut bias);

        let mut changed = false;
        // first improve the cycle means, then the biases among equal means
        for i in 0..n {
            let mut best_eta = eta[i];
            let mut choice = None;
            for j in 0..n {
                if a.get(i, j).is_some() && eta[j] > best_eta + tol {
                    best_eta = eta[j];
                    choice = Some(j);
                }
            }
            if let Some(j) = choice {
                policy[i] = j;
                changed = true;
            }
        }
        if !changed {
            for i in 0..n {
                let current = a.get(i, policy[i]).unwrap() - eta[i] + bias[policy[i]];
                let mut best = current;
                let mut choice = None;
                for j in 0..n {
                    let Some(w) = a.get(i, j) else { continue };
                    if (eta[j] - eta[i]).abs() > tol {
                        continue;
                    }
                    let value = w - eta[i] + bias[j];
                    if value > best + tol {
                        best = value;
                        choice = Some(j);
                    }
                }
                if let Some(j) = choice {
                    policy[i] = j;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(eta.into_iter().fold(T::neg_infinity(), T::max));
        }
    }
    Err(MaxPlusError::NoConvergence(MAX_ITER))
}

/// Cycle means and biases of the functional graph `i -> policy[i]`.
fn evaluate_policy<T: Scalar>(
    a: &MaxPlusMatrix<T>,
    policy: &[usize],
    eta: &mut [T],
    bias: &mut [T],
) {
    let n = policy.len();
    const UNSEEN: usize = usize::MAX;
    let mut stamp = vec![UNSEEN; n];
    for start in 0..n {
        if stamp[start] != UNSEEN {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while stamp[cur] == UNSEEN {
            stamp[cur] = start;
            path.push(cur);
            cur = policy[cur];
        }
        let mut tree_end = path.len();
        if stamp[cur] == start {
            // new cycle starting at `cur`
            let pos = path.iter().position(|&v| v == cur).unwrap();
            let cycle = &path[pos..];
            let total = cycle
                .iter()
                .fold(T::zero(), |acc, &v| acc + a.get(v, policy[v]).unwrap());
            let mean = total / T::of_usize(cycle.len());
            let keep = bias[cur];
            for &v in cycle {
                eta[v] = mean;
            }
            bias[cur] = keep;
            for &v in cycle[1..].iter().rev() {
                bias[v] = a.get(v, policy[v]).unwrap() - mean + bias[policy[v]];
            }
            tree_end = pos;
        }
        for &v in path[..tree_end].iter().rev() {
            let next = policy[v];
            eta[v] = eta[next];
            bias[v] = a.get(v, next).unwrap() - eta[v] + bias[next];
        }
    }
}

fn tolerance<T: Scalar>(a: &MaxPlusMatrix<T>) -> T {
    let scale = a.arcs().fold(T::one(), |acc, (_, _, w)| acc.max(w.abs()));
    T::epsilon().sqrt() * T::of(1e-2) * scale
}

/// Growth rate (Karp) together with one critical cycle.
pub fn cycle_time<T: Scalar>(a: &MaxPlusMatrix<T>) -> Result<CycleTimeResult<T>, MaxPlusError> {
    let rate = karp(a)?;
    let n = a.dim();
    let tol = tolerance(a) * T::of_usize(n);
    // longest walk weights (arc direction j -> i) of A - rate
    let mut best: Vec<Vec<Option<T>>> = vec![vec![None; n]; n];
    for (i, j, w) in a.arcs() {
        best[j][i] = Some(w - rate);
    }
    for k in 0..n {
        for u in 0..n {
            let Some(uk) = best[u][k] else { continue };
            for v in 0..n {
                if let Some(kv) = best[k][v] {
                    let cand = uk + kv;
                    if best[u][v].is_none_or(|x| cand > x) {
                        best[u][v] = Some(cand);
                    }
                }
            }
        }
    }
    let critical = |u: usize| best[u][u].is_some_and(|w| w >= -tol);
    let on_critical_arc = |u: usize, v: usize| {
        let w = a.get(v, u).expect("arc");
        critical(v) && best[v][u].is_some_and(|back| w - rate + back >= -tol)
    };
    let start = (0..n)
        .find(|&u| critical(u))
        .ok_or(MaxPlusError::NotStronglyConnected)?;
    let mut seen = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut cur = start;
    while seen[cur] == usize::MAX {
        seen[cur] = walk.len();
        walk.push(cur);
        cur = (0..n)
            .find(|&v| a.get(v, cur).is_some() && on_critical_arc(cur, v))
            .ok_or(MaxPlusError::NotStronglyConnected)?;
    }
    Ok(CycleTimeResult {
        growth_rate: rate,
        critical_cycle: walk[seen[cur]..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxplus::mp_multiply;

    fn cycle_mean(a: &MaxPlusMatrix<f64>, cycle: &[usize]) -> f64 {
        let total: f64 = (0..cycle.len())
            .map(|i| a.get(cycle[(i + 1) % cycle.len()], cycle[i]).unwrap())
            .sum();
        total / cycle.len() as f64
    }

    #[test]
    fn self_loop() {
        let a = MaxPlusMatrix::from_rows(vec![vec![Some(5.0)]]).unwrap();
        let r = cycle_time(&a).unwrap();
        assert_eq!(r.growth_rate, 5.0);
        assert_eq!(r.critical_cycle, vec![0]);
        assert_eq!(howard(&a).unwrap(), 5.0);
    }

    #[test]
    fn two_cycle() {
        let a =
            MaxPlusMatrix::from_rows(vec![vec![None, Some(3.0)], vec![Some(4.0), None]]).unwrap();
        let r = cycle_time(&a).unwrap();
        assert_eq!(r.growth_rate, 3.5);
        assert_eq!(r.critical_cycle.len(), 2);
        assert_eq!(howard(&a).unwrap(), 3.5);
    }

    #[test]
    fn not_strongly_connected() {
        let a = MaxPlusMatrix::from_rows(vec![vec![Some(1.0), None], vec![Some(4.0), Some(2.0)]])
            .unwrap();
        assert_eq!(karp(&a), Err(MaxPlusError::NotStronglyConnected));
        assert_eq!(howard(&a), Err(MaxPlusError::NotStronglyConnected));
    }

    #[test]
    fn critical_cycle_attains_rate() {
        // two loops through node 0: means 6 and 4
        let mut a = MaxPlusMatrix::<f64>::epsilon(4).unwrap();
        a.set(1, 0, Some(5.0)).unwrap();
        a.set(2, 1, Some(6.0)).unwrap();
        a.set(0, 2, Some(7.0)).unwrap();
        a.set(3, 0, Some(4.0)).unwrap();
        a.set(0, 3, Some(4.0)).unwrap();
        let r = cycle_time(&a).unwrap();
        assert_eq!(r.growth_rate, 6.0);
        assert_eq!(cycle_mean(&a, &r.critical_cycle), 6.0);
        assert_eq!(r.critical_cycle.len(), 3);
    }

    #[test]
    fn loop_with_one_train() {
        // three-segment loop, one train in segment 0, runs of 60 s, a 10 s dwell
        // in segment 0, separation 30 s:
        //   d0(k) = max(d2(k-1) + 70, d1(k-1) + 30)
        //   d1(k) = max(d0(k) + 60,   d2(k-1) + 30)
        //   d2(k) = max(d1(k) + 60,   d0(k) + 30)
        let e = None;
        let same = MaxPlusMatrix::from_rows(vec![
            vec![e, e, e],
            vec![Some(60.0), e, e],
            vec![Some(30.0), Some(60.0), e],
        ])
        .unwrap();
        let previous = MaxPlusMatrix::from_rows(vec![
            vec![e, Some(30.0), Some(70.0)],
            vec![e, e, Some(30.0)],
            vec![e, e, e],
        ])
        .unwrap();
        // same-count arcs are nilpotent: star = I + S + S^2
        let id = MaxPlusMatrix::identity(3).unwrap();
        let s2 = mp_multiply(&same, &same).unwrap();
        let mut star = id.clone();
        for m in [&same, &s2] {
            for (i, j, w) in m.arcs() {
                star.raise(i, j, w);
            }
        }
        let full = mp_multiply(&star, &previous).unwrap();
        // segment 0's previous departure is never read; keep nodes 1 and 2
        let reduced = full.submatrix(&[1, 2]).unwrap();
        assert_eq!(reduced.get(1, 1), Some(190.0));
        let r = cycle_time(&reduced).unwrap();
        assert_eq!(r.growth_rate, 190.0);
        assert_eq!(howard(&reduced).unwrap(), 190.0);
    }
}

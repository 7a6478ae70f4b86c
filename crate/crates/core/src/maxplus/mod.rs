//! Max-plus matrices.
//!
//! Entries are `Option<T>`: `None` is ε (minus infinity), the neutral element
//! of ⊕ = max and the absorbing element of ⊗ = +. A finite entry `A[i][j]`
//! is an arc j → i of the precedence graph: `x_i >= A[i][j] + x_j`.

mod assemble;
mod cycle;

use std::fmt::Write as _;

use thiserror::Error;

use crate::Scalar;

pub use assemble::{assemble_matrix, AssembledSystem};
pub use cycle::{cycle_time, howard, karp, CycleTimeResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxPlusError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("precedence graph is not strongly connected")]
    NotStronglyConnected,
    #[error("matrix must have at least one row")]
    Empty,
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error(
        "segment {segment} has passenger demand; the max-plus model needs constant dwell times"
    )]
    DemandNotZero { segment: usize },
    #[error("no train can move")]
    Deadlock,
    #[error("policy iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("triplet csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaxPlusMatrix<T> {
    n: usize,
    entries: Vec<Option<T>>,
}

impl<T: Scalar> MaxPlusMatrix<T> {
    /// All-ε matrix.
    pub fn epsilon(n: usize) -> Result<Self, MaxPlusError> {
        if n == 0 {
            return Err(MaxPlusError::Empty);
        }
        Ok(MaxPlusMatrix {
            n,
            entries: vec![None; n * n],
        })
    }

    /// Zero on the diagonal, ε elsewhere.
    pub fn identity(n: usize) -> Result<Self, MaxPlusError> {
        let mut m = Self::epsilon(n)?;
        for i in 0..n {
            m.entries[i * n + i] = Some(T::zero());
        }
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<Option<T>>>) -> Result<Self, MaxPlusError> {
        let n = rows.len();
        let mut m = Self::epsilon(n)?;
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(MaxPlusError::DimensionMismatch(n, row.len()));
            }
            for (j, w) in row.into_iter().enumerate() {
                m.set(i, j, w)?;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, w: Option<T>) -> Result<(), MaxPlusError> {
        if let Some(x) = w {
            if !x.is_finite() {
                return Err(MaxPlusError::NonFinite { row: i, col: j });
            }
        }
        self.entries[i * self.n + j] = w;
        Ok(())
    }

    /// `A[i][j] <- max(A[i][j], w)`.
    pub fn raise(&mut self, i: usize, j: usize, w: T) {
        let e = &mut self.entries[i * self.n + j];
        *e = Some(e.map_or(w, |x| x.max(w)));
    }

    /// Finite entries as `(row, col, weight)`.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(idx, w)| w.map(|w| (idx / self.n, idx % self.n, w)))
    }

    /// Adds `c` to every finite entry.
    pub fn shifted(&self, c: T) -> Self {
        MaxPlusMatrix {
            n: self.n,
            entries: self.entries.iter().map(|w| w.map(|x| x + c)).collect(),
        }
    }

    /// `(A ⊗ x)_i = max_j A[i][j] + x_j`.
    pub fn apply(&self, x: &[Option<T>]) -> Result<Vec<Option<T>>, MaxPlusError> {
        if x.len() != self.n {
            return Err(MaxPlusError::DimensionMismatch(self.n, x.len()));
        }
        Ok((0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter_map(|j| Some(self.get(i, j)? + x[j]?))
                    .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
            })
            .collect())
    }

    pub fn submatrix(&self, idx: &[usize]) -> Result<Self, MaxPlusError> {
        let mut m = Self::epsilon(idx.len())?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.entries[a * idx.len() + b] = self.get(i, j);
            }
        }
        Ok(m)
    }

    /// Strongly connected components of the precedence graph (Tarjan).
    pub fn components(&self) -> Vec<Vec<usize>> {
        struct Tarjan<'a> {
            adj: &'a [Vec<usize>],
            index: Vec<Option<usize>>,
            low: Vec<usize>,
            on_stack: Vec<bool>,
            stack: Vec<usize>,
            next: usize,
            out: Vec<Vec<usize>>,
        }
        impl Tarjan<'_> {
            fn visit(&mut self, v: usize) {
                self.index[v] = Some(self.next);
                self.low[v] = self.next;
                self.next += 1;
                self.stack.push(v);
                self.on_stack[v] = true;
                for &w in &self.adj[v] {
                    match self.index[w] {
                        None => {
                            self.visit(w);
                            self.low[v] = self.low[v].min(self.low[w]);
                        }
                        Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                        _ => {}
                    }
                }
                if Some(self.low[v]) == self.index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = self.stack.pop().unwrap();
                        self.on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    self.out.push(comp);
                }
            }
        }
        let mut adj = vec![Vec::new(); self.n];
        for (i, j, _) in self.arcs() {
            adj[j].push(i);
        }
        let mut t = Tarjan {
            adj: &adj,
            index: vec![None; self.n],
            low: vec![0; self.n],
            on_stack: vec![false; self.n],
            stack: Vec::new(),
            next: 0,
            out: Vec::new(),
        };
        for v in 0..self.n {
            if t.index[v].is_none() {
                t.visit(v);
            }
        }
        t.out
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// `row,col,weight_s` lines for every finite entry.
    pub fn to_triplet_csv(&self) -> String {
        let mut out = String::from("row,col,weight_s\n");
        for (i, j, w) in self.arcs() {
            let _ = writeln!(out, "{i},{j},{}", w.as_f64());
        }
        out
    }

    /// Parse triplets for an `n`×`n` matrix; missing entries are ε.
    pub fn from_triplet_csv(n: usize, text: &str) -> Result<Self, MaxPlusError> {
        let mut m = Self::epsilon(n)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("row")) {
                continue;
            }
            let err = |reason: &str| MaxPlusError::Parse {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected row,col,weight_s"));
            }
            let i: usize = fields[0].parse().map_err(|_| err("bad row"))?;
            let j: usize = fields[1].parse().map_err(|_| err("bad col"))?;
            let w: f64 = fields[2].parse().map_err(|_| err("bad weight"))?;
            if i >= n || j >= n {
                return Err(err("index out of range"));
            }
            m.set(i, j, Some(T::of(w)))?;
        }
        Ok(m)
    }
}

/// `(A ⊗ B)[i][j] = max_k A[i][k] + B[k][j]`.
pub fn mp_multiply<T: Scalar>(
    a: &MaxPlusMatrix<T>,
    b: &MaxPlusMatrix<T>,
) -> Result<MaxPlusMatrix<T>, MaxPlusError> {
    if a.n != b.n {
        return Err(MaxPlusError::DimensionMismatch(a.n, b.n));
    }
    let n = a.n;
    let mut out = MaxPlusMatrix::epsilon(n)?;
    for i in 0..n {
        for k in 0..n {
            let Some(x) = a.get(i, k) else { continue };
            for j in 0..n {
                if let Some(y) = b.get(k, j) {
                    out.raise(i, j, x + y);
                }
            }
        }
    }
    Ok(out)
}

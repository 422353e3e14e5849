use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use super::ordering::{inverse_permutation, Ordering};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Relative jitter ladder: `1e-10, 1e-9, ..., 1e-4` times the mean diagonal.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// Metadata attached to every factorization so jitter is never silent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub ordering: Ordering,
    /// Absolute value added to the diagonal (0 when none was needed).
    pub jitter: f64,
    pub attempts: usize,
    pub nnz_l: usize,
}

/// `P A Pᵀ = L Lᵀ`, with `L` stored by columns, diagonal first.
#[derive(Clone, Debug)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    report: FactorReport,
}

/// Upper triangle of `C = P A Pᵀ` in compressed-column form.
struct UpperPermuted {
    cp: Vec<usize>,
    ci: Vec<usize>,
    cx: Vec<f64>,
}

fn permuted_upper(a: &CsrMatrix, perm: &[usize], pinv: &[usize]) -> UpperPermuted {
    let n = a.n();
    let mut cp = Vec::with_capacity(n + 1);
    let mut ci = Vec::new();
    let mut cx = Vec::new();
    cp.push(0);
    for k in 0..n {
        let (cols, vals) = a.row(perm[k]);
        for (&j, &v) in cols.iter().zip(vals) {
            let i = pinv[j];
            if i <= k {
                ci.push(i);
                cx.push(v);
            }
        }
        cp.push(ci.len());
    }
    UpperPermuted { cp, ci, cx }
}

fn etree(c: &UpperPermuted, n: usize) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &i0 in &c.ci[c.cp[k]..c.cp[k + 1]] {
            let mut i = i0;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order.
fn ereach(
    c: &UpperPermuted,
    k: usize,
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = mark.len();
    let mut top = n;
    mark[k] = k;
    for &i0 in &c.ci[c.cp[k]..c.cp[k + 1]] {
        let mut i = i0;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    /// Factors `A`, escalating diagonal jitter on breakdown.
    pub fn factor(a: &CsrMatrix, ordering: Ordering) -> Result<Self> {
        let n = a.n();
        let perm = ordering.compute(a);
        let mean_diag = if n == 0 {
            0.0
        } else {
            a.diagonal().iter().sum::<f64>() / n as f64
        };
        let mut attempts = 1;
        match Self::factor_with(a, ordering, perm.clone(), 0.0) {
            Ok(mut f) => {
                f.report.attempts = attempts;
                return Ok(f);
            }
            Err(Error::Definiteness(_)) => {}
            Err(e) => return Err(e),
        }
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            attempts += 1;
            let jitter = rel * scale;
            match Self::factor_with(a, ordering, perm.clone(), jitter) {
                Ok(mut f) => {
                    log::warn!("sparse Cholesky needed diagonal jitter {jitter:e}");
                    f.report.attempts = attempts;
                    return Ok(f);
                }
                Err(Error::Definiteness(_)) => rel *= 10.0,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Definiteness(format!(
            "sparse Cholesky failed even with jitter {:e} x mean diagonal",
            JITTER_MAX
        )))
    }

    /// Factors `A + jitter I` once under the given permutation
    /// (`perm[new] = old`).
    pub fn factor_with(
        a: &CsrMatrix,
        ordering: Ordering,
        perm: Vec<usize>,
        jitter: f64,
    ) -> Result<Self> {
        let n = a.n();
        if perm.len() != n {
            return Err(Error::input("permutation length differs from matrix size"));
        }
        let pinv = inverse_permutation(&perm);
        let c = permuted_upper(a, &perm, &pinv);
        let parent = etree(&c, n);
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];

        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut stack);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.fill(NONE);

        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut stack);
            for p in c.cp[k]..c.cp[k + 1] {
                x[c.ci[p]] = c.cx[p];
            }
            let mut d = x[k] + jitter;
            x[k] = 0.0;
            for &j in &stack[top..] {
                let lkj = x[j] / lx[lp[j]];
                x[j] = 0.0;
                for p in lp[j] + 1..next[j] {
                    x[li[p]] -= lx[p] * lkj;
                }
                d -= lkj * lkj;
                let p = next[j];
                next[j] += 1;
                li[p] = k;
                lx[p] = lkj;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Definiteness(format!(
                    "nonpositive pivot {d:e} at step {k} of {n}"
                )));
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(SparseCholesky {
            n,
            perm,
            pinv,
            lp,
            li,
            lx,
            report: FactorReport {
                ordering,
                jitter,
                attempts: 1,
                nnz_l: nnz,
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn report(&self) -> &FactorReport {
        &self.report
    }

    pub fn jitter(&self) -> f64 {
        self.report.jitter
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// `ln |A + jitter I| = 2 Σ ln L_kk`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.n).map(|k| self.lx[self.lp[k]].ln()).sum::<f64>()
    }

    fn lower_solve(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            x[j] /= self.lx[s];
            let xj = x[j];
            for p in s + 1..e {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
    }

    fn upper_solve(&self, x: &mut [f64]) {
        for j in (0..self.n).rev() {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            let mut acc = x[j];
            for p in s + 1..e {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc / self.lx[s];
        }
    }

    fn check_len(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.n {
            return Err(Error::input(format!(
                "rhs length {} for an n = {} factor",
                b.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Solves `(A + jitter I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lower_solve(&mut y);
        self.upper_solve(&mut y);
        Ok((0..self.n).map(|old| y[self.pinv[old]]).collect())
    }

    /// `bᵀ (A + jitter I)⁻¹ b` via a single triangular solve.
    pub fn inv_quad_form(&self, b: &[f64]) -> Result<f64> {
        self.check_len(b)?;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lower_solve(&mut y);
        Ok(y.iter().map(|v| v * v).sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub value: f64,
    pub report: FactorReport,
}

/// `ln |A|` via sparse Cholesky under the default ordering.
pub fn sparse_logdet(a: &CsrMatrix) -> Result<LogDet> {
    sparse_logdet_with(a, Ordering::default())
}

pub fn sparse_logdet_with(a: &CsrMatrix, ordering: Ordering) -> Result<LogDet> {
    let f = SparseCholesky::factor(a, ordering)?;
    Ok(LogDet {
        value: f.logdet(),
        report: f.report().clone(),
    })
}

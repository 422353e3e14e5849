//! Block-parallel assembly of the sparse covariance matrix `K + V`.
//!
//! The index range is cut into contiguous blocks; each upper-triangle block
//! pair is a self-contained work item producing triplets at global offsets.
//! Fragments are merged in block order, so the result never depends on
//! worker count or completion order.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BoundKernel, KernelSpec, Point, PreparedPoints};
use crate::sparse::{CsrMatrix, Triplet, TripletMatrix};

pub const DEFAULT_BLOCK_SIZE: usize = 1000;

/// Half-open index range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRange {
    pub start: usize,
    pub end: usize,
}

impl BlockRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

pub fn partition(n: usize, block_size: usize) -> Result<Vec<BlockRange>> {
    if block_size == 0 {
        return Err(Error::input("block size must be >= 1"));
    }
    Ok((0..n)
        .step_by(block_size)
        .map(|start| BlockRange {
            start,
            end: (start + block_size).min(n),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyPlan {
    pub block_size: usize,
    pub workers: usize,
}

impl Default for AssemblyPlan {
    fn default() -> Self {
        AssemblyPlan {
            block_size: DEFAULT_BLOCK_SIZE,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl AssemblyPlan {
    pub fn new(block_size: usize, workers: usize) -> Result<Self> {
        if block_size == 0 || workers == 0 {
            return Err(Error::input("block size and worker count must be >= 1"));
        }
        Ok(AssemblyPlan {
            block_size,
            workers,
        })
    }

    /// Upper-triangle block pairs `(a, b)` with `a <= b`, row-major.
    pub fn block_pairs(num_blocks: usize) -> Vec<(usize, usize)> {
        (0..num_blocks)
            .flat_map(|a| (a..num_blocks).map(move |b| (a, b)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub n: usize,
    pub block_size: usize,
    pub workers: usize,
    pub nnz: usize,
    pub density: f64,
    pub t_covariance_s: f64,
    pub t_merge_s: f64,
    pub t_csr_s: f64,
}

impl AssemblyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Triplets for block pair `(a, b)` at global offsets. Diagonal blocks emit
/// only their upper triangle; the lower half is synthesized at merge.
pub fn compute_block(
    kernel: &BoundKernel,
    points: &PreparedPoints,
    a: BlockRange,
    b: BlockRange,
) -> Result<Vec<Triplet>> {
    let diagonal = a == b;
    let mut out = Vec::new();
    for i in a.start..a.end {
        let j0 = if diagonal { i } else { b.start };
        for j in j0..b.end {
            let v = kernel.pair(points, i, points, j);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("kernel value {v} at ({i}, {j})")));
            }
            if v != 0.0 {
                out.push(Triplet {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

fn pool(workers: usize) -> Result<Arc<ThreadPool>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS
        .get_or_init(Default::default)
        .lock()
        .expect("pool cache lock");
    if let Some(p) = pools.get(&workers) {
        return Ok(p.clone());
    }
    let p = Arc::new(
        ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("assembly-{i}"))
            .build()
            .map_err(|e| Error::Assembly(format!("cannot start {workers} workers: {e}")))?,
    );
    pools.insert(workers, p.clone());
    Ok(p)
}

fn with_block(e: Error, a: usize, b: usize) -> Error {
    let tag = |m: String| format!("block pair ({a}, {b}): {m}");
    match e {
        Error::Evaluation(m) => Error::Evaluation(tag(m)),
        Error::Hyperparameter(m) => Error::Hyperparameter(tag(m)),
        other => Error::Assembly(tag(other.to_string())),
    }
}

/// Assembles `K + diag(noise)` in CSR form.
pub fn assemble(
    kernel: &BoundKernel,
    points: &PreparedPoints,
    noise: &[f64],
    plan: &AssemblyPlan,
) -> Result<(CsrMatrix, AssemblyReport)> {
    let n = points.len();
    if noise.len() != n {
        return Err(Error::input(format!(
            "noise has length {} for {n} points",
            noise.len()
        )));
    }
    if let Some(v) = noise.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::input(format!(
            "noise variances must be finite and >= 0, got {v}"
        )));
    }
    let plan = AssemblyPlan::new(plan.block_size, plan.workers)?;
    let blocks = partition(n, plan.block_size)?;
    let pairs = AssemblyPlan::block_pairs(blocks.len());

    let t0 = Instant::now();
    let fragments: Vec<Result<Vec<Triplet>>> = pool(plan.workers)?.install(|| {
        pairs
            .par_iter()
            .map(|&(a, b)| {
                compute_block(kernel, points, blocks[a], blocks[b])
                    .or_else(|first| {
                        log::warn!("retrying block pair ({a}, {b}) after: {first}");
                        compute_block(kernel, points, blocks[a], blocks[b])
                    })
                    .map_err(|e| with_block(e, a, b))
            })
            .collect()
    });
    let t_covariance_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut diag = noise.to_vec();
    let mut entries = Vec::new();
    for frag in fragments {
        for t in frag? {
            if t.row == t.col {
                diag[t.row] += t.value;
            } else {
                entries.push(t);
                entries.push(Triplet {
                    row: t.col,
                    col: t.row,
                    value: t.value,
                });
            }
        }
    }
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Definiteness(format!(
            "K + V has nonpositive diagonal {} at row {i}",
            diag[i]
        )));
    }
    entries.extend(diag.iter().enumerate().map(|(i, &v)| Triplet {
        row: i,
        col: i,
        value: v,
    }));
    let triplets = TripletMatrix::from_entries(n, entries)?;
    let t_merge_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let csr = triplets.to_csr()?;
    let t_csr_s = t2.elapsed().as_secs_f64();

    let report = AssemblyReport {
        n,
        block_size: plan.block_size,
        workers: plan.workers,
        nnz: csr.nnz(),
        density: csr.density(),
        t_covariance_s,
        t_merge_s,
        t_csr_s,
    };
    log::debug!("assembly {}", report.to_json());
    Ok((csr, report))
}

/// Binds `spec` at `theta` and assembles over `points`.
pub fn assemble_spec(
    spec: &KernelSpec,
    theta: &[f64],
    points: &[Point],
    noise: &[f64],
    plan: &AssemblyPlan,
) -> Result<(CsrMatrix, AssemblyReport)> {
    let dim = points.first().map_or(1, Point::dim);
    let kernel = BoundKernel::bind(spec, theta, dim, Some(points))?;
    let prepared = kernel.prepare(points)?;
    assemble(&kernel, &prepared, noise, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelNode;

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| Point::indexed(vec![x], i))
            .collect()
    }

    #[test]
    fn partition_examples() {
        let r = |s, e| BlockRange { start: s, end: e };
        assert_eq!(partition(10, 4).unwrap(), vec![r(0, 4), r(4, 8), r(8, 10)]);
        assert_eq!(partition(4, 10).unwrap(), vec![r(0, 4)]);
        let p = partition(1000, 250).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|b| b.len() == 250));
        assert!(partition(3, 0).is_err());
    }

    #[test]
    fn block_pairs_cover_upper_triangle() {
        assert_eq!(
            AssemblyPlan::block_pairs(3),
            vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        );
    }

    #[test]
    fn compute_block_examples() {
        let spec = KernelSpec::new(KernelNode::wendland(1.0), vec![]);
        let x = pts(&[0.0, 0.5, 2.0]);
        let k = BoundKernel::bind(&spec, &[], 1, None).unwrap();
        let p = k.prepare(&x).unwrap();
        let all = BlockRange { start: 0, end: 3 };
        let t = compute_block(&k, &p, all, all).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.contains(&Triplet {
            row: 0,
            col: 1,
            value: 0.061_035_156_25
        }));
        let one = BlockRange { start: 2, end: 3 };
        assert_eq!(
            compute_block(&k, &p, one, one).unwrap(),
            vec![Triplet {
                row: 2,
                col: 2,
                value: 1.0
            }]
        );
        let far = BlockRange { start: 0, end: 2 };
        assert!(compute_block(&k, &p, far, one).unwrap().is_empty());
    }

    #[test]
    fn single_point_with_noise() {
        let spec = KernelSpec::new(KernelNode::wendland(1.0), vec![]);
        let (a, r) = assemble_spec(
            &spec,
            &[],
            &pts(&[0.3]),
            &[0.01],
            &AssemblyPlan::new(4, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(a.to_dense()[(0, 0)], 1.01);
        assert_eq!((r.n, r.nnz), (1, 1));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "n",
            "block_size",
            "workers",
            "nnz",
            "density",
            "t_covariance_s",
            "t_merge_s",
            "t_csr_s",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn noise_validation() {
        let spec = KernelSpec::new(KernelNode::wendland(1.0), vec![]);
        let plan = AssemblyPlan::default();
        assert!(assemble_spec(&spec, &[], &pts(&[0.0, 1.0]), &[0.1], &plan).is_err());
        assert!(assemble_spec(&spec, &[], &pts(&[0.0]), &[-0.1], &plan).is_err());
    }
}

//! Inner quadratic solver and the adaptive outer loop.
//!
//! The inner problem is the convex quadratic in the joint packed coordinates
//! `theta = [div | curl]`. It is solved matrix-free by preconditioned
//! conjugate gradients on the stationarity system `H theta = b`, where
//! `H = (2/P) M^T M + 2 R` with `M` the real design matrix of the reduced
//! parameterization and `R` the regularization diagonal (also the natural
//! preconditioner, here extended to the full Jacobi diagonal).
//!
//! The outer loop starts from the index cube `{-1,0,1}^n` for both
//! components, then repeatedly: grows both sets by one offset layer (skipped
//! on the first pass), solves the joint problem warm-started from surviving
//! coefficients, and — while either boundary-to-total energy ratio exceeds
//! its threshold — prunes low-energy boundary pairs, keeping the most
//! energetic pairs up to a `1 - eps_boundary` share of the boundary energy.

use nalgebra as na;

use crate::constraints::{CoefficientSet, ConstraintKind};
use crate::exec;
use crate::objective::{MeasurementSet, Regularization};
use crate::spectral::{IndexSet, MultiIndex, MAX_DIM};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Inner (quadratic) solver settings.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Relative gradient-norm stopping tolerance.
    pub grad_tol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_inner_iters: Option<usize>,
    /// Start from the templates' current coefficients instead of zero.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-10,
            max_inner_iters: None,
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_inner_iters == Some(0) {
            return Err(Error::InvalidConfig("max_inner_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outer adaptive-loop settings.
#[derive(Clone, Debug)]
pub struct OuterConfig {
    /// Boundary-energy share pruned from the divergence-free set, in [0, 1].
    pub eps_boundary_div: f64,
    /// Boundary-energy share pruned from the curl-free set, in [0, 1].
    pub eps_boundary_curl: f64,
    /// Convergence threshold on the divergence-free boundary ratio.
    pub delta_div: f64,
    /// Convergence threshold on the curl-free boundary ratio.
    pub delta_curl: f64,
    /// Outer-iteration cap.
    pub total_it: usize,
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_boundary_div", self.eps_boundary_div),
            ("eps_boundary_curl", self.eps_boundary_curl),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        for (name, v) in [("delta_div", self.delta_div), ("delta_curl", self.delta_curl)] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.total_it == 0 {
            return Err(Error::InvalidConfig("total_it must be >= 1".into()));
        }
        Ok(())
    }
}

/// One outer iteration of the adaptive loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub n_div: usize,
    pub n_curl: usize,
    pub energy_div: f64,
    pub energy_curl: f64,
    pub bratio_div: f64,
    pub bratio_curl: f64,
    pub objective: f64,
    pub inner_iters: usize,
}

/// Outcome of [`decompose`].
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub div: CoefficientSet,
    pub curl: CoefficientSet,
    pub trace: Vec<TraceEntry>,
    /// False when the loop hit `total_it` with a boundary ratio still above
    /// threshold.
    pub converged: bool,
}

/// Solution of one inner solve.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub div: CoefficientSet,
    pub curl: CoefficientSet,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

struct BlockPair {
    /// First column of this pair inside the component block.
    col: usize,
    count: usize,
    basis: [[f64; MAX_DIM]; 2],
    /// Per-column quadratic weight `2 eps (2 pi)^{2k} (ahat.ahat)^k`.
    ridge: f64,
}

struct ComponentBlock {
    offset: usize,
    zero_cols: usize,
    pairs: Vec<BlockPair>,
    /// `(cos, sin)` of `2 pi ahat . x_i`, laid out `[i * npairs + p]`.
    trig: Vec<(f64, f64)>,
    cols: usize,
}

/// Matrix-free view of the joint quadratic in packed coordinates.
pub(crate) struct ReducedSystem {
    dim: usize,
    p: usize,
    cols: usize,
    blocks: Vec<ComponentBlock>,
    /// Measured values, flattened `[i * dim + k]`.
    u: Vec<f64>,
}

impl ReducedSystem {
    pub(crate) fn new(
        div: &CoefficientSet,
        curl: &CoefficientSet,
        m: &MeasurementSet,
        reg: &Regularization,
    ) -> Self {
        let dim = m.dom().dim();
        let p = m.len();
        let mut blocks = Vec::with_capacity(2);
        let mut offset = 0;
        for set in [div, curl] {
            let block = Self::build_block(set, m, reg, offset);
            offset += block.cols;
            blocks.push(block);
        }
        let mut u = Vec::with_capacity(p * dim);
        for value in m.values() {
            u.extend_from_slice(value);
        }
        Self {
            dim,
            p,
            cols: offset,
            blocks,
            u,
        }
    }

    fn build_block(
        set: &CoefficientSet,
        m: &MeasurementSet,
        reg: &Regularization,
        offset: usize,
    ) -> ComponentBlock {
        let dom = set.dom();
        let dim = dom.dim();
        let (eps, k) = reg.for_kind(set.kind());
        let zero_cols = if set.zero_mode().is_some() { dim } else { 0 };
        let mut pairs = Vec::new();
        let mut col = zero_cols;
        let mut ahats = Vec::new();
        for alpha in set.indices().representatives().filter(|a| !a.is_zero()) {
            let basis = set.pair_basis(alpha).expect("canonical member");
            let mut b = [[0.0; MAX_DIM]; 2];
            for j in 0..basis.count() {
                b[j][..dim].copy_from_slice(basis.vector(j));
            }
            let nsq = dom.scaled_norm_sq(alpha);
            pairs.push(BlockPair {
                col,
                count: basis.count(),
                basis: b,
                ridge: 2.0 * eps * TWO_PI.powf(2.0 * k) * nsq.powf(k),
            });
            col += 2 * basis.count();
            ahats.push(dom.scaled_index(alpha));
        }
        let npairs = pairs.len();
        let trig_rows = exec::map_indexed(m.len(), |i| {
            let x = dom.fold(&m.points()[i]);
            let mut row = Vec::with_capacity(npairs);
            for ahat in &ahats {
                let mut phase = 0.0;
                for k in 0..dim {
                    phase += ahat[k] * x[k];
                }
                let (s, c) = (TWO_PI * phase).sin_cos();
                row.push((c, s));
            }
            row
        });
        let mut trig = Vec::with_capacity(m.len() * npairs);
        for row in trig_rows {
            trig.extend(row);
        }
        ComponentBlock {
            offset,
            zero_cols,
            pairs,
            trig,
            cols: col,
        }
    }

    pub(crate) fn cols(&self) -> usize {
        self.cols
    }

    fn field_at(&self, i: usize, theta: &[f64]) -> [f64; MAX_DIM] {
        let mut acc = [0.0; MAX_DIM];
        for block in &self.blocks {
            let base = &theta[block.offset..];
            for k in 0..block.zero_cols {
                acc[k] += base[k];
            }
            let trig = &block.trig[i * block.pairs.len()..(i + 1) * block.pairs.len()];
            for (pair, &(c, s)) in block.pairs.iter().zip(trig) {
                for j in 0..pair.count {
                    let re = base[pair.col + 2 * j];
                    let im = base[pair.col + 2 * j + 1];
                    let w = 2.0 * (re * c - im * s);
                    for k in 0..self.dim {
                        acc[k] += w * pair.basis[j][k];
                    }
                }
            }
        }
        acc
    }

    /// `M theta`, flattened `[i * dim + k]`.
    fn design_apply(&self, theta: &[f64]) -> Vec<f64> {
        let rows = exec::map_indexed(self.p, |i| self.field_at(i, theta));
        let mut out = Vec::with_capacity(self.p * self.dim);
        for row in rows {
            out.extend_from_slice(&row[..self.dim]);
        }
        out
    }

    /// `M^T w` for `w` flattened `[i * dim + k]`.
    fn design_transpose_apply(&self, w: &[f64]) -> Vec<f64> {
        exec::sum_vectors(self.p, self.cols, |i, acc| {
            let wi = &w[i * self.dim..(i + 1) * self.dim];
            for block in &self.blocks {
                for k in 0..block.zero_cols {
                    acc[block.offset + k] += wi[k];
                }
                let trig = &block.trig[i * block.pairs.len()..(i + 1) * block.pairs.len()];
                for (pair, &(c, s)) in block.pairs.iter().zip(trig) {
                    for j in 0..pair.count {
                        let mut dot = 0.0;
                        for k in 0..self.dim {
                            dot += wi[k] * pair.basis[j][k];
                        }
                        acc[block.offset + pair.col + 2 * j] += 2.0 * c * dot;
                        acc[block.offset + pair.col + 2 * j + 1] += -2.0 * s * dot;
                    }
                }
            }
        })
    }

    fn ridge_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.cols];
        for block in &self.blocks {
            for pair in &block.pairs {
                for j in 0..pair.count {
                    w[block.offset + pair.col + 2 * j] = pair.ridge;
                    w[block.offset + pair.col + 2 * j + 1] = pair.ridge;
                }
            }
        }
        w
    }

    /// Hessian application `(2/P) M^T (M v) + 2 R v`.
    fn hess_apply(&self, v: &[f64], ridge: &[f64]) -> Vec<f64> {
        let mv = self.design_apply(v);
        let mut out = self.design_transpose_apply(&mv);
        let scale = 2.0 / self.p as f64;
        for (o, (&vv, &r)) in out.iter_mut().zip(v.iter().zip(ridge)) {
            *o = scale * *o + 2.0 * r * vv;
        }
        out
    }

    /// Right-hand side `(2/P) M^T u` of the stationarity system.
    fn rhs(&self) -> Vec<f64> {
        let mut b = self.design_transpose_apply(&self.u);
        let scale = 2.0 / self.p as f64;
        for v in &mut b {
            *v *= scale;
        }
        b
    }

    /// Jacobi diagonal `(2/P) diag(M^T M) + 2 R`.
    fn hess_diag(&self, ridge: &[f64]) -> Vec<f64> {
        let mut colsq = vec![0.0; self.cols];
        for block in &self.blocks {
            for k in 0..block.zero_cols {
                colsq[block.offset + k] = self.p as f64;
            }
            let npairs = block.pairs.len();
            for (p, pair) in block.pairs.iter().enumerate() {
                let mut csum = 0.0;
                let mut ssum = 0.0;
                for i in 0..self.p {
                    let (c, s) = block.trig[i * npairs + p];
                    csum += c * c;
                    ssum += s * s;
                }
                for j in 0..pair.count {
                    colsq[block.offset + pair.col + 2 * j] = 4.0 * csum;
                    colsq[block.offset + pair.col + 2 * j + 1] = 4.0 * ssum;
                }
            }
        }
        let scale = 2.0 / self.p as f64;
        colsq
            .iter()
            .zip(ridge)
            .map(|(&c, &r)| scale * c + 2.0 * r)
            .collect()
    }

    /// Objective value `(1/P) |M theta - u|^2 + theta^T R theta`.
    pub(crate) fn objective_value(&self, theta: &[f64], ridge: &[f64]) -> f64 {
        let f = self.design_apply(theta);
        let misfit = exec::sum_indexed(f.len(), |r| {
            let d = f[r] - self.u[r];
            d * d
        }) / self.p as f64;
        let quad = exec::sum_indexed(self.cols, |j| ridge[j] * theta[j] * theta[j]);
        misfit + quad
    }

    /// Materialized design matrix, for the dense oracle.
    fn dense_design(&self) -> na::DMatrix<f64> {
        let rows = self.p * self.dim;
        let mut m = na::DMatrix::zeros(rows, self.cols);
        for i in 0..self.p {
            for block in &self.blocks {
                for k in 0..block.zero_cols {
                    m[(i * self.dim + k, block.offset + k)] = 1.0;
                }
                let npairs = block.pairs.len();
                for (p, pair) in block.pairs.iter().enumerate() {
                    let (c, s) = block.trig[i * npairs + p];
                    for j in 0..pair.count {
                        for k in 0..self.dim {
                            let b = pair.basis[j][k];
                            m[(i * self.dim + k, block.offset + pair.col + 2 * j)] = 2.0 * c * b;
                            m[(i * self.dim + k, block.offset + pair.col + 2 * j + 1)] =
                                -2.0 * s * b;
                        }
                    }
                }
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    exec::sum_indexed(a.len(), |i| a[i] * b[i])
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn pack_joint(div: &CoefficientSet, curl: &CoefficientSet) -> Vec<f64> {
    let mut theta = div.pack();
    theta.extend(curl.pack());
    theta
}

fn unpack_joint(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    theta: &[f64],
) -> Result<(CoefficientSet, CoefficientSet)> {
    let nd = div.reduced_dim();
    Ok((
        div.with_packed(&theta[..nd])?,
        curl.with_packed(&theta[nd..])?,
    ))
}

/// Solves the joint inner problem to the configured gradient tolerance.
///
/// The templates provide the index sets and, with `warm_start`, the starting
/// coefficients. Fails with the best iterate attached when the iteration cap
/// is reached first.
pub fn solve_inner(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    m: &MeasurementSet,
    reg: &Regularization,
    cfg: &SolverConfig,
) -> Result<InnerSolution> {
    cfg.validate()?;
    if div.dom() != curl.dom() || div.dom() != m.dom() {
        return Err(Error::DomainMismatch);
    }
    let sys = ReducedSystem::new(div, curl, m, reg);
    let ridge = sys.ridge_weights();
    let n = sys.cols();
    let x0 = if cfg.warm_start {
        pack_joint(div, curl)
    } else {
        vec![0.0; n]
    };

    let b = sys.rhs();
    // the gradient at zero is -b, so this fixes the relative scale
    let target = cfg.grad_tol * (1.0 + norm(&b));
    let max_iters = cfg.max_inner_iters.unwrap_or(10 * n.max(1));

    let diag = sys.hess_diag(&ridge);
    let floor = 1e-300 + diag.iter().cloned().fold(0.0, f64::max) * 1e-30;
    let precond = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(&diag)
            .map(|(&ri, &di)| ri / di.max(floor))
            .collect()
    };

    let mut x = x0;
    let mut r: Vec<f64> = b
        .iter()
        .zip(sys.hess_apply(&x, &ridge))
        .map(|(&bi, ax)| bi - ax)
        .collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut grad_norm = norm(&r);

    while grad_norm > target && iterations < max_iters {
        let q = sys.hess_apply(&p, &ridge);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            // exhausted the numerically positive subspace
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
        }
        iterations += 1;
        if iterations % 64 == 0 {
            // refresh the true residual; the recurrence drifts
            r = b
                .iter()
                .zip(sys.hess_apply(&x, &ridge))
                .map(|(&bi, ax)| bi - ax)
                .collect();
        } else {
            for i in 0..n {
                r[i] -= alpha * q[i];
            }
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        grad_norm = norm(&r);
    }

    // judge convergence on the exact residual
    let r_true: Vec<f64> = b
        .iter()
        .zip(sys.hess_apply(&x, &ridge))
        .map(|(&bi, ax)| bi - ax)
        .collect();
    grad_norm = norm(&r_true);
    if grad_norm > target {
        return Err(Error::InnerSolver {
            iterations,
            grad_norm,
            target,
            best: x,
            trace: Vec::new(),
        });
    }
    let objective = sys.objective_value(&x, &ridge);
    let (div, curl) = unpack_joint(div, curl, &x)?;
    Ok(InnerSolution {
        div,
        curl,
        iterations,
        grad_norm,
        objective,
    })
}

/// Exact minimizer via explicitly assembled normal equations, for testing.
///
/// Singular systems resolve to the minimum-norm solution; with all
/// regularization zero that case is reported with a warning.
pub fn solve_dense_oracle(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    m: &MeasurementSet,
    reg: &Regularization,
) -> Result<(CoefficientSet, CoefficientSet)> {
    if div.dom() != curl.dom() || div.dom() != m.dom() {
        return Err(Error::DomainMismatch);
    }
    let sys = ReducedSystem::new(div, curl, m, reg);
    let n = sys.cols();
    if n == 0 {
        return unpack_joint(div, curl, &[]);
    }
    let ridge = sys.ridge_weights();
    let design = sys.dense_design();
    let inv_p = 1.0 / m.len() as f64;
    // (1/P) M^T M + R, and (1/P) M^T u
    let mut a = design.transpose() * &design * inv_p;
    for j in 0..n {
        a[(j, j)] += ridge[j];
    }
    let u = na::DVector::from_column_slice(&sys.u);
    let rhs = design.transpose() * u * inv_p;

    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = sigma_max * n as f64 * f64::EPSILON;
    let singular = svd.singular_values.iter().any(|&s| s <= cutoff);
    if singular && ridge.iter().all(|&r| r == 0.0) {
        log::warn!("normal equations are singular with zero regularization; returning the minimum-norm solution");
    }
    let theta = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::InvalidConfig(format!("dense solve failed: {e}")))?;
    unpack_joint(div, curl, theta.as_slice())
}

/// Removes low-energy boundary pairs, keeping the most energetic boundary
/// pairs until they hold a `1 - fraction` share of the boundary energy.
///
/// Interior indices are untouched, pairs are removed together, and the zero
/// mode is never pruned. `fraction = 0` keeps everything.
pub fn prune_boundary(coeffs: &CoefficientSet, fraction: f64) -> CoefficientSet {
    assert!(
        (0.0..=1.0).contains(&fraction),
        "pruning fraction must lie in [0, 1], got {fraction}"
    );
    if fraction == 0.0 {
        return coeffs.clone();
    }
    let boundary = coeffs.indices().boundary();
    let zero = MultiIndex::zero(coeffs.dim());
    let total = coeffs.energy_of(&boundary);
    let target = (1.0 - fraction) * total;

    let mut ranked: Vec<(MultiIndex, f64)> = boundary
        .representatives()
        .filter(|a| !a.is_zero())
        .map(|a| {
            let pair = IndexSet::symmetric(coeffs.dim(), [*a]);
            (*a, coeffs.energy_of(&pair))
        })
        .collect();
    ranked.sort_by(|(a, ea), (b, eb)| eb.partial_cmp(ea).unwrap().then(a.cmp(b)));

    // the zero mode always counts as kept
    let mut kept = if boundary.contains(&zero) {
        coeffs.energy_of(&IndexSet::symmetric(coeffs.dim(), [zero]))
    } else {
        0.0
    };
    let mut drop = Vec::new();
    for (alpha, e) in ranked {
        if kept >= target {
            drop.push(alpha);
        } else {
            kept += e;
        }
    }
    let indices = coeffs.indices().without_pairs(&drop);
    coeffs
        .with_indices(indices)
        .expect("restriction preserves the domain")
}

/// Runs the adaptive grow/solve/prune loop on the measurements.
///
/// Both index sets start at `{-1,0,1}^n`. The loop returns as converged when
/// neither boundary ratio exceeds its threshold, and unconditionally after
/// `total_it` outer iterations with `converged = false`.
pub fn decompose(
    m: &MeasurementSet,
    reg: &Regularization,
    outer: &OuterConfig,
    inner: &SolverConfig,
) -> Result<DecompositionResult> {
    outer.validate()?;
    inner.validate()?;
    reg.warn_if_inadmissible(m.dom().dim());
    let dim = m.dom().dim();
    let start = IndexSet::cube(dim, 1);
    let mut div = CoefficientSet::zeros(
        ConstraintKind::DivergenceFree,
        m.dom().clone(),
        start.clone(),
    )?;
    let mut curl = CoefficientSet::zeros(ConstraintKind::CurlFree, m.dom().clone(), start)?;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut converged = false;

    for niter in 0..outer.total_it {
        if niter != 0 {
            div = div.with_indices(div.indices().grow())?;
            curl = curl.with_indices(curl.indices().grow())?;
        }
        let sol = match solve_inner(&div, &curl, m, reg, inner) {
            Ok(sol) => sol,
            Err(Error::InnerSolver {
                iterations,
                grad_norm,
                target,
                best,
                ..
            }) => {
                return Err(Error::InnerSolver {
                    iterations,
                    grad_norm,
                    target,
                    best,
                    trace,
                })
            }
            Err(e) => return Err(e),
        };
        div = sol.div;
        curl = sol.curl;

        let energy_div = div.energy();
        let energy_curl = curl.energy();
        let bd_div = div.boundary_energy();
        let bd_curl = curl.boundary_energy();
        let bratio_div = if energy_div > 0.0 {
            bd_div / energy_div
        } else {
            0.0
        };
        let bratio_curl = if energy_curl > 0.0 {
            bd_curl / energy_curl
        } else {
            0.0
        };
        trace.push(TraceEntry {
            iter: niter,
            n_div: div.indices().len(),
            n_curl: curl.indices().len(),
            energy_div,
            energy_curl,
            bratio_div,
            bratio_curl,
            objective: sol.objective,
            inner_iters: sol.iterations,
        });

        if bratio_div > outer.delta_div || bratio_curl > outer.delta_curl {
            div = prune_boundary(&div, outer.eps_boundary_div);
            curl = prune_boundary(&curl, outer.eps_boundary_curl);
        } else {
            converged = true;
            break;
        }
    }

    Ok(DecompositionResult {
        div,
        curl,
        trace,
        converged,
    })
}

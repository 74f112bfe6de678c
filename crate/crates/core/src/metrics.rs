//! Uniform evaluation grids, error norms, and the spectral-decay diagnostic.

use crate::constraints::CoefficientSet;
use crate::exec;
use crate::spectral::Domain;
use crate::{Error, Result};

/// Uniform cell-centered grid over a periodic box.
///
/// Point `(i_1, ..., i_n)` sits at `x_k = (i_k + 1/2) D_k / res_k`; flat
/// ordering is row-major with the last coordinate fastest. Cell centers make
/// the plain cell-sum a midpoint quadrature rule, which integrates
/// band-limited integrands exactly once the grid resolves them.
#[derive(Clone, Debug)]
pub struct Grid {
    dom: Domain,
    res: Vec<usize>,
}

impl Grid {
    pub fn new(dom: Domain, res: &[usize]) -> Result<Self> {
        if res.len() != dom.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} resolutions for a {}-dimensional domain",
                res.len(),
                dom.dim()
            )));
        }
        if res.iter().any(|&r| r < 2) {
            return Err(Error::InvalidConfig(
                "grid resolution must be at least 2 per direction".into(),
            ));
        }
        Ok(Self {
            dom,
            res: res.to_vec(),
        })
    }

    /// Same resolution along every direction.
    pub fn isotropic(dom: Domain, res: usize) -> Result<Self> {
        let r = vec![res; dom.dim()];
        Self::new(dom, &r)
    }

    pub fn dom(&self) -> &Domain {
        &self.dom
    }

    pub fn res(&self) -> &[usize] {
        &self.res
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dom.volume() / self.len() as f64
    }

    /// Integer coordinates of a flat index (last coordinate fastest).
    pub fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.res.len()];
        for k in (0..self.res.len()).rev() {
            out[k] = flat % self.res[k];
            flat /= self.res[k];
        }
        out
    }

    /// Cell center of a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.coords(flat)
            .iter()
            .zip(self.dom.lengths())
            .zip(&self.res)
            .map(|((&i, &d), &r)| (i as f64 + 0.5) * d / r as f64)
            .collect()
    }

    /// All cell centers in flat order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Evaluates a function at every cell center, in flat order.
    pub fn evaluate<F>(&self, f: F) -> Vec<Vec<f64>>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync + Send,
    {
        exec::map_indexed(self.len(), |i| f(&self.point(i)))
    }
}

/// Euclidean distance between an approximate and an exact value.
pub fn pointwise_error(approx: &[f64], exact: &[f64]) -> f64 {
    assert_eq!(approx.len(), exact.len(), "value dimension mismatch");
    approx
        .iter()
        .zip(exact)
        .map(|(a, e)| (e - a) * (e - a))
        .sum::<f64>()
        .sqrt()
}

/// Largest pointwise error over paired value lists.
pub fn linf_error(approx: &[Vec<f64>], exact: &[Vec<f64>]) -> f64 {
    assert_eq!(approx.len(), exact.len(), "grid length mismatch");
    approx
        .iter()
        .zip(exact)
        .map(|(a, e)| pointwise_error(a, e))
        .fold(0.0, f64::max)
}

/// Unnormalized continuous `L^2` error `(integral of e^2 dv)^(1/2)` by the
/// midpoint rule on the grid.
pub fn l2_error(approx: &[Vec<f64>], exact: &[Vec<f64>], grid: &Grid) -> f64 {
    assert_eq!(approx.len(), grid.len(), "grid length mismatch");
    assert_eq!(exact.len(), grid.len(), "grid length mismatch");
    let sum = exec::sum_indexed(grid.len(), |i| {
        let e = pointwise_error(&approx[i], &exact[i]);
        e * e
    });
    (sum * grid.cell_volume()).sqrt()
}

/// Result of the exponential-decay fit `|coef| ~ exp(-q |a|^b)`.
#[derive(Clone, Copy, Debug)]
pub struct DecayFit {
    /// Fitted exponent `b` (slope of `ln |ln |coef||` against `ln |a|`).
    pub exponent: f64,
    /// Fitted rate `q` (from the intercept).
    pub rate: f64,
    /// Root-mean-square residual of the line fit.
    pub residual: f64,
    /// Number of magnitude shells used.
    pub shells: usize,
}

/// Fits the exponential index of convergence from shell-maximum coefficient
/// magnitudes. Purely diagnostic.
///
/// Members are grouped into shells of equal `|a|`; each shell contributes its
/// largest materialized coefficient norm. At least five populated shells with
/// nonzero, non-unit magnitude are required.
pub fn estimate_decay(coeffs: &CoefficientSet) -> Result<DecayFit> {
    use std::collections::BTreeMap;
    let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
    for alpha in coeffs.indices().iter() {
        if alpha.is_zero() {
            continue;
        }
        let c = coeffs.coefficient(alpha).expect("member");
        let mag = c
            .iter()
            .take(coeffs.dim())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let entry = shells.entry(alpha.norm_sq()).or_insert(0.0);
        *entry = entry.max(mag);
    }
    let populated: Vec<(f64, f64)> = shells
        .into_iter()
        .filter(|&(_, m)| m > 0.0)
        .map(|(nsq, m)| (0.5 * (nsq as f64).ln(), m))
        .collect();
    if populated.len() < 5 {
        return Err(Error::InsufficientShells {
            needed: 5,
            found: populated.len(),
        });
    }
    let mags: Vec<f64> = populated.iter().map(|&(_, m)| m).collect();
    let spread = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - mags.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= 1e-12 * mags[0].abs() {
        return Err(Error::DegenerateFit(
            "shell magnitudes are constant".into(),
        ));
    }
    let xy: Vec<(f64, f64)> = populated
        .iter()
        .map(|&(lx, m)| (lx, m.ln().abs().ln()))
        .collect();
    if xy.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateFit(
            "log-log transform produced non-finite values".into(),
        ));
    }
    let n = xy.len() as f64;
    let sx: f64 = xy.iter().map(|&(x, _)| x).sum();
    let sy: f64 = xy.iter().map(|&(_, y)| y).sum();
    let sxx: f64 = xy.iter().map(|&(x, _)| x * x).sum();
    let sxy: f64 = xy.iter().map(|&(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() <= 1e-14 * (1.0 + sxx.abs()) {
        return Err(Error::DegenerateFit("all shells share one radius".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = (xy
        .iter()
        .map(|&(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        exponent: slope,
        rate: intercept.exp(),
        residual,
        shells: xy.len(),
    })
}

//! Constrained Fourier coefficient sets.
//!
//! A [`CoefficientSet`] stores one component of the decomposition in a
//! reduced real parameterization that enforces, by construction,
//!
//! - `ahat . v_a = 0` for the divergence-free component,
//! - `ahat x s_a = 0` for the curl-free component,
//! - `v_a = conj(v_{-a})` (real-valued fields),
//!
//! where `ahat` is the scaled wavevector. Each canonical index `a` (first
//! nonzero entry positive) carries one complex scalar per admissible
//! direction: the tangent plane/line orthogonal to `ahat` for the
//! divergence-free kind, the `ahat` direction itself for the curl-free kind.
//! The coupled `-a` coefficient is never stored; it is the conjugate under
//! the sign rule `basis(-a) = -basis(a)`, i.e. `scalar(-a) = -conj(scalar(a))`.
//!
//! The zero mode (field mean) belongs to the divergence-free component by
//! convention; both constraints are vacuous at `a = 0` and a fixed convention
//! keeps the decomposition unique. The curl-free component has zero mean.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::exec;
use crate::spectral::{basis_eval, Domain, IndexSet, MultiIndex, MAX_DIM};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Which algebraic constraint a coefficient set satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    DivergenceFree,
    CurlFree,
}

impl ConstraintKind {
    /// Number of admissible directions per nonzero index.
    pub fn subspace_dim(&self, dim: usize) -> usize {
        match self {
            ConstraintKind::DivergenceFree => dim - 1,
            ConstraintKind::CurlFree => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ConstraintKind::DivergenceFree => "divergence-free",
            ConstraintKind::CurlFree => "curl-free",
        }
    }
}

/// Orthonormal real basis of the admissible coefficient directions at one
/// nonzero index.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    vectors: [[f64; MAX_DIM]; 2],
    count: usize,
    dim: usize,
}

impl SubspaceBasis {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        assert!(j < self.count);
        &self.vectors[j][..self.dim]
    }

    fn negated(mut self) -> Self {
        for v in &mut self.vectors {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        self
    }
}

fn normalize(v: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; MAX_DIM], b: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Admissible directions at `alpha != 0`.
///
/// The construction is fixed so results reproduce bit-for-bit: it is applied
/// to the canonical member of `{alpha, -alpha}` and negated for the other,
/// which makes conjugate symmetry linear in the reduced scalars.
///
/// Divergence-free, 2D: the tangent `normalize((-ahat_2, ahat_1))`.
/// Divergence-free, 3D: with `e` the axis least aligned with `ahat`
/// (smallest magnitude component, ties to the lowest axis),
/// `b1 = normalize(ahat x e)` and `b2 = normalize(ahat x b1)`.
/// Curl-free: the single direction `normalize(ahat)`.
pub fn subspace_basis(
    alpha: &MultiIndex,
    kind: ConstraintKind,
    dom: &Domain,
) -> Result<SubspaceBasis> {
    if alpha.is_zero() {
        return Err(Error::ZeroIndex);
    }
    let (canon, flipped) = alpha.canonical();
    let basis = raw_basis(&canon, kind, dom);
    Ok(if flipped { basis.negated() } else { basis })
}

fn raw_basis(alpha: &MultiIndex, kind: ConstraintKind, dom: &Domain) -> SubspaceBasis {
    let dim = dom.dim();
    let ahat = dom.scaled_index(alpha);
    let mut vectors = [[0.0; MAX_DIM]; 2];
    let count = match (kind, dim) {
        (ConstraintKind::CurlFree, _) => {
            vectors[0] = normalize(ahat);
            1
        }
        (ConstraintKind::DivergenceFree, 2) => {
            vectors[0] = normalize([-ahat[1], ahat[0], 0.0]);
            1
        }
        (ConstraintKind::DivergenceFree, _) => {
            let mut axis = 0;
            for i in 1..3 {
                if ahat[i].abs() < ahat[axis].abs() {
                    axis = i;
                }
            }
            let mut e = [0.0; MAX_DIM];
            e[axis] = 1.0;
            let b1 = normalize(cross(ahat, e));
            let b2 = normalize(cross(ahat, b1));
            vectors[0] = b1;
            vectors[1] = b2;
            2
        }
    };
    SubspaceBasis {
        vectors,
        count,
        dim,
    }
}

#[derive(Clone, Debug)]
struct Pair {
    alpha: MultiIndex,
    ahat: [f64; MAX_DIM],
    basis: SubspaceBasis,
    scalars: [Complex64; 2],
}

impl Pair {
    fn count(&self) -> usize {
        self.basis.count()
    }

    /// `|v_a|^2 = sum_j |c_j|^2` (the basis is orthonormal).
    fn member_energy(&self) -> f64 {
        self.scalars[..self.count()]
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }

    /// Materialized coefficient at the canonical index.
    fn coefficient(&self) -> [Complex64; MAX_DIM] {
        let mut v = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..self.count() {
            let c = self.scalars[j];
            for (k, &b) in self.basis.vectors[j].iter().enumerate() {
                v[k] += c * b;
            }
        }
        v
    }
}

/// One constrained component: index set plus reduced coefficients.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    kind: ConstraintKind,
    dom: Domain,
    indices: IndexSet,
    /// Field mean; present only for the divergence-free kind when the zero
    /// index is a member.
    zero_mode: Option<[f64; MAX_DIM]>,
    /// Canonical nonzero indices in lexicographic order.
    pairs: Vec<Pair>,
}

impl CoefficientSet {
    /// All-zero coefficients over the given index set.
    pub fn zeros(kind: ConstraintKind, dom: Domain, indices: IndexSet) -> Result<Self> {
        if indices.dim() != dom.dim() {
            return Err(Error::DimensionMismatch(format!(
                "index set dimension {} vs domain dimension {}",
                indices.dim(),
                dom.dim()
            )));
        }
        let zero_mode = (kind == ConstraintKind::DivergenceFree
            && indices.contains(&MultiIndex::zero(dom.dim())))
        .then_some([0.0; MAX_DIM]);
        let pairs = indices
            .representatives()
            .filter(|a| !a.is_zero())
            .map(|a| Pair {
                alpha: *a,
                ahat: dom.scaled_index(a),
                basis: raw_basis(a, kind, &dom),
                scalars: [Complex64::new(0.0, 0.0); 2],
            })
            .collect();
        Ok(Self {
            kind,
            dom,
            indices,
            zero_mode,
            pairs,
        })
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn dom(&self) -> &Domain {
        &self.dom
    }

    pub fn indices(&self) -> &IndexSet {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.dom.dim()
    }

    /// Field mean, when this set carries one.
    pub fn zero_mode(&self) -> Option<&[f64]> {
        self.zero_mode.as_ref().map(|z| &z[..self.dim()])
    }

    pub(crate) fn set_zero_mode(&mut self, v: &[f64]) -> Result<()> {
        match self.zero_mode.as_mut() {
            Some(z) => {
                z[..v.len()].copy_from_slice(v);
                Ok(())
            }
            None => Err(Error::InvalidConfig(format!(
                "{} set over these indices has no zero mode",
                self.kind.label()
            ))),
        }
    }

    /// Reduced scalars at a canonical member index.
    pub fn pair_scalars(&self, alpha: &MultiIndex) -> Option<&[Complex64]> {
        self.find_pair(alpha)
            .map(|p| &p.scalars[..p.basis.count()])
    }

    pub(crate) fn set_pair_scalars(&mut self, alpha: &MultiIndex, scalars: &[Complex64]) -> Result<()> {
        let pos = self
            .pairs
            .binary_search_by(|p| p.alpha.cmp(alpha))
            .map_err(|_| Error::InvalidConfig(format!("{alpha:?} is not a canonical member")))?;
        let pair = &mut self.pairs[pos];
        if scalars.len() != pair.count() {
            return Err(Error::InvalidConfig(format!(
                "{alpha:?} takes {} scalars, got {}",
                pair.count(),
                scalars.len()
            )));
        }
        pair.scalars[..scalars.len()].copy_from_slice(scalars);
        Ok(())
    }

    fn find_pair(&self, alpha: &MultiIndex) -> Option<&Pair> {
        self.pairs
            .binary_search_by(|p| p.alpha.cmp(alpha))
            .ok()
            .map(|i| &self.pairs[i])
    }

    /// The subspace basis stored for a canonical member.
    pub fn pair_basis(&self, alpha: &MultiIndex) -> Option<&SubspaceBasis> {
        self.find_pair(alpha).map(|p| &p.basis)
    }

    /// Length of the packed real coordinate vector.
    pub fn reduced_dim(&self) -> usize {
        let zero = if self.zero_mode.is_some() {
            self.dim()
        } else {
            0
        };
        zero + self.pairs.iter().map(|p| 2 * p.count()).sum::<usize>()
    }

    /// Packs the reduced coordinates: zero mode first, then canonical indices
    /// in lexicographic order with real part before imaginary part.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.reduced_dim());
        if let Some(z) = self.zero_mode {
            out.extend_from_slice(&z[..self.dim()]);
        }
        for p in &self.pairs {
            for j in 0..p.count() {
                out.push(p.scalars[j].re);
                out.push(p.scalars[j].im);
            }
        }
        out
    }

    /// Rebuilds a set of the same shape from packed coordinates.
    pub fn with_packed(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.reduced_dim() {
            return Err(Error::PackedLength {
                got: theta.len(),
                expected: self.reduced_dim(),
            });
        }
        let mut out = self.clone();
        let mut k = 0;
        if let Some(z) = out.zero_mode.as_mut() {
            for i in 0..out.dom.dim() {
                z[i] = theta[k];
                k += 1;
            }
        }
        for p in &mut out.pairs {
            for j in 0..p.basis.count() {
                p.scalars[j] = Complex64::new(theta[k], theta[k + 1]);
                k += 2;
            }
        }
        Ok(out)
    }

    /// Transfers coefficients onto another index set: overlapping pairs keep
    /// their values, new pairs start at zero, dropped pairs are discarded.
    pub fn with_indices(&self, indices: IndexSet) -> Result<Self> {
        let mut out = Self::zeros(self.kind, self.dom.clone(), indices)?;
        if let (Some(dst), Some(src)) = (out.zero_mode.as_mut(), self.zero_mode.as_ref()) {
            *dst = *src;
        }
        for p in &mut out.pairs {
            if let Some(old) = self.find_pair(&p.alpha) {
                p.scalars = old.scalars;
            }
        }
        Ok(out)
    }

    /// Materialized complex coefficient at any member index.
    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<[Complex64; MAX_DIM]> {
        if !self.indices.contains(alpha) {
            return None;
        }
        if alpha.is_zero() {
            let mut v = [Complex64::new(0.0, 0.0); MAX_DIM];
            if let Some(z) = self.zero_mode {
                for k in 0..self.dim() {
                    v[k] = Complex64::new(z[k], 0.0);
                }
            }
            return Some(v);
        }
        let (canon, flipped) = alpha.canonical();
        let mut v = self.find_pair(&canon)?.coefficient();
        if flipped {
            for c in &mut v {
                *c = c.conj();
            }
        }
        Some(v)
    }

    /// Field value at a point (folded into the box).
    ///
    /// Conjugate pairs are summed as `2 Re(v_a phi(x, a))`, which is the full
    /// member sum re-associated; the result is real by construction. Use
    /// [`CoefficientSet::evaluate_complex`] to observe the imaginary residue
    /// of the literal member-by-member sum.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let folded = self.dom.fold(x);
        let dim = self.dim();
        let mut acc = [0.0; MAX_DIM];
        if let Some(z) = self.zero_mode {
            acc = z;
        }
        for p in &self.pairs {
            let mut phase = 0.0;
            for k in 0..dim {
                phase += p.ahat[k] * folded[k];
            }
            let (s, c) = (TWO_PI * phase).sin_cos();
            for j in 0..p.count() {
                let w = 2.0 * (p.scalars[j].re * c - p.scalars[j].im * s);
                for (k, &b) in p.basis.vectors[j][..dim].iter().enumerate() {
                    acc[k] += w * b;
                }
            }
        }
        acc[..dim].to_vec()
    }

    /// Field values at many points; parallel under the `parallel` feature,
    /// with output order fixed.
    pub fn evaluate_many(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        exec::map_indexed(points.len(), |i| self.evaluate(&points[i]))
    }

    /// Literal sum over every member index, kept complex.
    ///
    /// For a symmetry-respecting set the imaginary part is at rounding level;
    /// anything larger signals a corrupted coefficient set.
    pub fn evaluate_complex(&self, x: &[f64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.dim()];
        for alpha in self.indices.iter() {
            let coeff = self.coefficient(alpha).expect("member");
            let phi = basis_eval(x, alpha, &self.dom);
            for (k, a) in acc.iter_mut().enumerate() {
                *a += coeff[k] * phi;
            }
        }
        acc
    }

    /// Spectral energy `sum_a v_a . conj(v_a)` over all members.
    pub fn energy(&self) -> f64 {
        let zero = self
            .zero_mode
            .map_or(0.0, |z| z.iter().map(|v| v * v).sum());
        zero + self
            .pairs
            .iter()
            .map(|p| 2.0 * p.member_energy())
            .sum::<f64>()
    }

    /// Energy restricted to a view of the member indices.
    ///
    /// The view must be a subset of this set's indices.
    pub fn energy_of(&self, view: &IndexSet) -> f64 {
        let mut acc = 0.0;
        for alpha in view.iter() {
            assert!(
                self.indices.contains(alpha),
                "energy view contains non-member {alpha:?}"
            );
            if alpha.is_zero() {
                acc += self
                    .zero_mode
                    .map_or(0.0, |z| z.iter().map(|v| v * v).sum());
            } else if alpha.is_canonical() {
                // its negation is also in the (negation-closed) view
                acc += 2.0 * self.find_pair(alpha).expect("canonical member").member_energy();
            }
        }
        acc
    }

    /// Energy carried by the boundary of the index set.
    pub fn boundary_energy(&self) -> f64 {
        self.energy_of(&self.indices.boundary())
    }

    /// Fractional Sobolev seminorm `(2 pi)^{2k} sum_a |v_a|^2 (ahat.ahat)^k`.
    ///
    /// At `k = 0` this reduces to [`CoefficientSet::energy`] (mean included);
    /// for `k > 0` the mean contributes nothing.
    pub fn seminorm_sq(&self, k: f64) -> Result<f64> {
        if k < 0.0 {
            return Err(Error::NegativeOrder(k));
        }
        let zero = self
            .zero_mode
            .map_or(0.0, |z| z.iter().map(|v| v * v).sum::<f64>())
            * 0.0f64.powf(k);
        let pairs: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let nsq: f64 = p.ahat.iter().map(|v| v * v).sum();
                2.0 * p.member_energy() * nsq.powf(k)
            })
            .sum();
        Ok(TWO_PI.powf(2.0 * k) * (zero + pairs))
    }

    /// Exact Fourier coefficients of the divergence, `2 pi j (v_a . ahat)`,
    /// per member index.
    pub fn divergence_spectrum(&self) -> BTreeMap<MultiIndex, Complex64> {
        self.indices
            .iter()
            .map(|alpha| {
                let coeff = self.coefficient(alpha).expect("member");
                (*alpha, divergence_coefficient(&self.dom, alpha, &coeff))
            })
            .collect()
    }

    /// Exact Fourier coefficients of the curl, `2 pi j (v_a x ahat)`, per
    /// member index; one entry in 2D, three in 3D.
    pub fn curl_spectrum(&self) -> BTreeMap<MultiIndex, Vec<Complex64>> {
        self.indices
            .iter()
            .map(|alpha| {
                let coeff = self.coefficient(alpha).expect("member");
                (*alpha, curl_coefficient(&self.dom, alpha, &coeff))
            })
            .collect()
    }
}

/// Divergence coefficient `2 pi j (v . ahat)` of one mode.
pub fn divergence_coefficient(
    dom: &Domain,
    alpha: &MultiIndex,
    coeff: &[Complex64; MAX_DIM],
) -> Complex64 {
    let ahat = dom.scaled_index(alpha);
    let mut dot = Complex64::new(0.0, 0.0);
    for k in 0..dom.dim() {
        dot += coeff[k] * ahat[k];
    }
    Complex64::new(0.0, TWO_PI) * dot
}

/// Curl coefficient `2 pi j (v x ahat)` of one mode: a scalar in 2D
/// (one entry), a vector in 3D.
pub fn curl_coefficient(
    dom: &Domain,
    alpha: &MultiIndex,
    coeff: &[Complex64; MAX_DIM],
) -> Vec<Complex64> {
    let ahat = dom.scaled_index(alpha);
    let j2pi = Complex64::new(0.0, TWO_PI);
    match dom.dim() {
        2 => vec![j2pi * (coeff[0] * ahat[1] - coeff[1] * ahat[0])],
        _ => vec![
            j2pi * (coeff[1] * ahat[2] - coeff[2] * ahat[1]),
            j2pi * (coeff[2] * ahat[0] - coeff[0] * ahat[2]),
            j2pi * (coeff[0] * ahat[1] - coeff[1] * ahat[0]),
        ],
    }
}

/// Parseval inner product `sum_{a in A and B} v_a . conj(w_a)`.
///
/// Real up to rounding for symmetry-respecting sets; the real part is
/// returned. A divergence-free and a curl-free set are orthogonal by
/// construction.
pub fn l2_inner(a: &CoefficientSet, b: &CoefficientSet) -> Result<f64> {
    if a.dom != b.dom {
        return Err(Error::DomainMismatch);
    }
    let shared = a.indices.intersection(&b.indices);
    let mut acc = Complex64::new(0.0, 0.0);
    for alpha in shared.iter() {
        let va = a.coefficient(alpha).expect("member");
        let vb = b.coefficient(alpha).expect("member");
        for k in 0..a.dim() {
            acc += va[k] * vb[k].conj();
        }
    }
    Ok(acc.re)
}

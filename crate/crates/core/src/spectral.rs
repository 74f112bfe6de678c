//! Periodic box domains, integer multi-indices, and Fourier basis evaluation.
//!
//! A field on the box `prod [0, D_i]` (treated as a torus) is expanded in the
//! basis `phi(x, a) = exp(2*pi*j * ahat . x)` where `ahat_i = a_i / D_i` is
//! the scaled wavevector of the integer multi-index `a`. Index sets are kept
//! closed under negation so real-valued fields stay representable; the set
//! boundary and one-layer growth drive the adaptive solver.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;

use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Rectangular periodic domain `prod [0, D_i]` in 2 or 3 dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    lengths: Vec<f64>,
}

impl Domain {
    pub fn new(lengths: &[f64]) -> Result<Self> {
        if lengths.len() < 2 || lengths.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(lengths.len()));
        }
        for &d in lengths {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NonPositiveLength(d));
            }
        }
        Ok(Self {
            lengths: lengths.to_vec(),
        })
    }

    /// Square/cubic box with side `d`.
    pub fn cube(dim: usize, d: f64) -> Result<Self> {
        Self::new(&vec![d; dim])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Scaled wavevector `ahat = (a_1/D_1, ..., a_n/D_n)`.
    ///
    /// Entries past `dim()` are zero.
    pub fn scaled_index(&self, alpha: &MultiIndex) -> [f64; MAX_DIM] {
        assert_eq!(
            alpha.dim(),
            self.dim(),
            "index dimension {} does not match domain dimension {}",
            alpha.dim(),
            self.dim()
        );
        let mut out = [0.0; MAX_DIM];
        for (i, &d) in self.lengths.iter().enumerate() {
            out[i] = f64::from(alpha.entries()[i]) / d;
        }
        out
    }

    /// `ahat . ahat` for the scaled wavevector of `alpha`.
    pub fn scaled_norm_sq(&self, alpha: &MultiIndex) -> f64 {
        let s = self.scaled_index(alpha);
        s.iter().map(|v| v * v).sum()
    }

    /// Folds a point into the box coordinate-wise (periodic interpretation).
    pub fn fold(&self, x: &[f64]) -> [f64; MAX_DIM] {
        assert_eq!(
            x.len(),
            self.dim(),
            "point dimension {} does not match domain dimension {}",
            x.len(),
            self.dim()
        );
        let mut out = [0.0; MAX_DIM];
        for (i, &d) in self.lengths.iter().enumerate() {
            out[i] = x[i].rem_euclid(d);
        }
        out
    }
}

/// Integer frequency multi-index in `Z^n`, `n` = 2 or 3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: [i32; MAX_DIM],
    dim: u8,
}

impl MultiIndex {
    pub fn new(entries: &[i32]) -> Self {
        assert!(
            entries.len() >= 2 && entries.len() <= MAX_DIM,
            "multi-index must have 2 or 3 entries, got {}",
            entries.len()
        );
        let mut e = [0i32; MAX_DIM];
        e[..entries.len()].copy_from_slice(entries);
        Self {
            entries: e,
            dim: entries.len() as u8,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries[..self.dim as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|&e| e == 0)
    }

    /// Squared Euclidean norm `|a|^2` of the raw integer entries.
    pub fn norm_sq(&self) -> i64 {
        self.entries()
            .iter()
            .map(|&e| i64::from(e) * i64::from(e))
            .sum()
    }

    pub fn offset_by(&self, delta: &MultiIndex) -> Self {
        assert_eq!(self.dim, delta.dim, "offset dimension mismatch");
        let mut e = self.entries;
        for i in 0..self.dim as usize {
            e[i] += delta.entries[i];
        }
        Self {
            entries: e,
            dim: self.dim,
        }
    }

    /// True when the first nonzero entry is positive, or the index is zero.
    ///
    /// Exactly one of `a`, `-a` is canonical for `a != 0`; the canonical
    /// member represents the conjugate pair `{a, -a}`.
    pub fn is_canonical(&self) -> bool {
        match self.entries().iter().find(|&&e| e != 0) {
            Some(&e) => e > 0,
            None => true,
        }
    }

    /// The canonical member of `{self, -self}` and whether a flip occurred.
    pub fn canonical(&self) -> (Self, bool) {
        if self.is_canonical() {
            (*self, false)
        } else {
            (-*self, true)
        }
    }
}

impl std::ops::Neg for MultiIndex {
    type Output = Self;
    fn neg(self) -> Self {
        let mut e = self.entries;
        for v in &mut e {
            *v = -*v;
        }
        Self {
            entries: e,
            dim: self.dim,
        }
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.entries())
    }
}

/// All nonzero offsets in `{-1,0,1}^n`; `3^n - 1` of them (8 in 2D, 26 in 3D).
pub fn offsets(dim: usize) -> Vec<MultiIndex> {
    assert!(
        (2..=MAX_DIM).contains(&dim),
        "unsupported dimension {dim}: expected 2 or 3"
    );
    let mut out = Vec::with_capacity(3usize.pow(dim as u32) - 1);
    let mut entries = vec![0i32; dim];
    fill_offsets(&mut entries, 0, &mut out);
    out
}

fn fill_offsets(entries: &mut [i32], pos: usize, out: &mut Vec<MultiIndex>) {
    if pos == entries.len() {
        if entries.iter().any(|&e| e != 0) {
            out.push(MultiIndex::new(entries));
        }
        return;
    }
    for v in [-1, 0, 1] {
        entries[pos] = v;
        fill_offsets(entries, pos + 1, out);
    }
    entries[pos] = 0;
}

/// Finite set of multi-indices, closed under negation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    dim: usize,
    members: BTreeSet<MultiIndex>,
}

impl IndexSet {
    /// Builds a set from explicit members, checking negation closure.
    pub fn from_members<I: IntoIterator<Item = MultiIndex>>(dim: usize, members: I) -> Result<Self> {
        let set: BTreeSet<MultiIndex> = members.into_iter().collect();
        for alpha in &set {
            if alpha.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "index {alpha:?} in a {dim}-dimensional set"
                )));
            }
            if !set.contains(&-*alpha) {
                return Err(Error::NotNegationClosed((-*alpha).entries().to_vec()));
            }
        }
        Ok(Self { dim, members: set })
    }

    /// Builds the negation closure of the given members.
    pub fn symmetric<I: IntoIterator<Item = MultiIndex>>(dim: usize, members: I) -> Self {
        let mut set = BTreeSet::new();
        for alpha in members {
            assert_eq!(alpha.dim(), dim, "index dimension mismatch");
            set.insert(alpha);
            set.insert(-alpha);
        }
        Self { dim, members: set }
    }

    /// Full hypercube `{-r..r}^n`.
    pub fn cube(dim: usize, radius: i32) -> Self {
        assert!((2..=MAX_DIM).contains(&dim));
        assert!(radius >= 0);
        let mut members = BTreeSet::new();
        let mut entries = vec![0i32; dim];
        fill_cube(&mut entries, 0, radius, &mut members);
        Self { dim, members }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        self.members.contains(alpha)
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }

    /// Canonical representatives (one per conjugate pair, zero included),
    /// in lexicographic order.
    pub fn representatives(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter().filter(|a| a.is_canonical())
    }

    /// Largest absolute entry over all members.
    pub fn max_abs_entry(&self) -> i32 {
        self.members
            .iter()
            .flat_map(|a| a.entries().iter().map(|e| e.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Members with at least one offset neighbor outside the set.
    pub fn boundary(&self) -> IndexSet {
        let deltas = offsets(self.dim);
        let members = self
            .members
            .iter()
            .filter(|alpha| {
                deltas
                    .iter()
                    .any(|d| !self.members.contains(&alpha.offset_by(d)))
            })
            .copied()
            .collect();
        Self {
            dim: self.dim,
            members,
        }
    }

    /// The set together with every offset translate of its members.
    pub fn grow(&self) -> IndexSet {
        let deltas = offsets(self.dim);
        let mut members = self.members.clone();
        for alpha in &self.members {
            for d in &deltas {
                members.insert(alpha.offset_by(d));
            }
        }
        Self {
            dim: self.dim,
            members,
        }
    }

    /// Removes the pairs `{a, -a}` for every `a` in `drop`, keeping closure.
    pub fn without_pairs(&self, drop: &[MultiIndex]) -> IndexSet {
        let mut members = self.members.clone();
        for alpha in drop {
            members.remove(alpha);
            members.remove(&-*alpha);
        }
        Self {
            dim: self.dim,
            members,
        }
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        Self {
            dim: self.dim,
            members: self.members.intersection(&other.members).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.members.is_subset(&other.members)
    }
}

fn fill_cube(entries: &mut [i32], pos: usize, radius: i32, out: &mut BTreeSet<MultiIndex>) {
    if pos == entries.len() {
        out.insert(MultiIndex::new(entries));
        return;
    }
    for v in -radius..=radius {
        entries[pos] = v;
        fill_cube(entries, pos + 1, radius, out);
    }
    entries[pos] = 0;
}

/// Fourier basis function `phi(x, a) = exp(2*pi*j * ahat . x)`.
///
/// The point is folded into the box first; the result has unit modulus and
/// `basis_eval(x, -a) = conj(basis_eval(x, a))`.
pub fn basis_eval(x: &[f64], alpha: &MultiIndex, dom: &Domain) -> Complex64 {
    let folded = dom.fold(x);
    let ahat = dom.scaled_index(alpha);
    let mut phase = 0.0;
    for i in 0..dom.dim() {
        phase += ahat[i] * folded[i];
    }
    let (s, c) = (2.0 * std::f64::consts::PI * phase).sin_cos();
    Complex64::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mi(e: &[i32]) -> MultiIndex {
        MultiIndex::new(e)
    }

    #[test]
    fn scaled_index_zero() {
        let dom = Domain::new(&[1.0, 4.0]).unwrap();
        assert_eq!(dom.scaled_index(&mi(&[0, 0]))[..2], [0.0, 0.0]);
    }

    #[test]
    fn scaled_index_divides_by_lengths() {
        let dom = Domain::new(&[2.0 * PI, PI]).unwrap();
        let s = dom.scaled_index(&mi(&[2, -1]));
        assert_abs_diff_eq!(s[0], 1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], -1.0 / PI, epsilon = 1e-15);

        let dom = Domain::cube(2, 3.0 * PI).unwrap();
        let s = dom.scaled_index(&mi(&[1, 2]));
        assert_abs_diff_eq!(s[0], 1.0 / (3.0 * PI), epsilon = 1e-16);
        assert_abs_diff_eq!(s[1], 2.0 / (3.0 * PI), epsilon = 1e-16);
    }

    #[test]
    fn basis_zero_index_is_one() {
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        for x in [[0.0, 0.0], [1.3, -2.7], [100.0, 5.0]] {
            let v = basis_eval(&x, &mi(&[0, 0]), &dom);
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn basis_half_phase_is_minus_one() {
        // ahat . x = 1/2  =>  exp(pi j) = -1
        let dom = Domain::cube(2, 2.0).unwrap();
        let x = [1.0, 0.0]; // ahat = (1/2, 0), dot = 1/2
        let v = basis_eval(&x, &mi(&[1, 0]), &dom);
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn basis_quarter_phase_is_j() {
        // Independent route: exp(j*theta) with theta = 2*pi*(1/(2*pi))*(pi/2).
        let theta: f64 = 2.0 * PI * (1.0 / (2.0 * PI)) * (PI / 2.0);
        let expect = Complex64::new(theta.cos(), theta.sin());
        assert_abs_diff_eq!(expect.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(expect.im, 1.0, epsilon = 1e-15);

        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let v = basis_eval(&[PI / 2.0, 0.0], &mi(&[1, 0]), &dom);
        assert_abs_diff_eq!(v.re, expect.re, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, expect.im, epsilon = 1e-14);
    }

    #[test]
    fn offsets_2d_has_expected_members() {
        let offs = offsets(2);
        assert_eq!(offs.len(), 8);
        for want in [[1, 0], [-1, 0], [0, 1], [1, 1], [1, -1]] {
            assert!(offs.contains(&mi(&want)), "missing offset {want:?}");
        }
        // negation-closed as a set
        for d in &offs {
            assert!(offs.contains(&-*d));
        }
    }

    #[test]
    fn offsets_3d_count() {
        assert_eq!(offsets(3).len(), 26);
    }

    #[test]
    #[should_panic(expected = "unsupported dimension")]
    fn offsets_rejects_bad_dim() {
        offsets(4);
    }

    #[test]
    fn boundary_of_unit_cube_excludes_origin() {
        let a = IndexSet::cube(2, 1);
        let b = a.boundary();
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&mi(&[0, 0])));
        assert!(b.is_subset(&a));
    }

    #[test]
    fn boundary_of_singleton_is_itself() {
        let a = IndexSet::symmetric(2, [mi(&[0, 0])]);
        let b = a.boundary();
        assert_eq!(b.len(), 1);
        assert!(b.contains(&mi(&[0, 0])));
    }

    #[test]
    fn boundary_of_radius_two_cube_by_brute_force() {
        let a = IndexSet::cube(2, 2);
        // Independent oracle: explicit neighbor check over all 25 members.
        let mut expect = Vec::new();
        for alpha in a.iter() {
            let mut missing = false;
            for d in offsets(2) {
                if !a.contains(&alpha.offset_by(&d)) {
                    missing = true;
                }
            }
            if missing {
                expect.push(*alpha);
            }
        }
        assert_eq!(expect.len(), 16);
        for alpha in &expect {
            assert_eq!(alpha.entries().iter().map(|e| e.abs()).max(), Some(2));
        }
        let b = a.boundary();
        assert_eq!(b.len(), 16);
        for alpha in expect {
            assert!(b.contains(&alpha));
        }
    }

    #[test]
    fn grow_unit_cube_gives_radius_two() {
        // Oracle: brute-force union of all offset translates.
        let a = IndexSet::cube(2, 1);
        let mut expect = BTreeSet::new();
        for alpha in a.iter() {
            expect.insert(*alpha);
            for d in offsets(2) {
                expect.insert(alpha.offset_by(&d));
            }
        }
        assert_eq!(expect.len(), 25);
        let g = a.grow();
        assert_eq!(g.len(), 25);
        assert_eq!(g, IndexSet::cube(2, 2));
    }

    #[test]
    fn grow_origin_gives_unit_cube() {
        let a = IndexSet::symmetric(2, [mi(&[0, 0])]);
        assert_eq!(a.grow(), IndexSet::cube(2, 1));
    }

    #[test]
    fn from_members_rejects_asymmetric() {
        let err = IndexSet::from_members(2, [mi(&[1, 0])]);
        assert!(matches!(err, Err(Error::NotNegationClosed(_))));
    }

    #[test]
    fn canonical_rule_first_nonzero_positive() {
        assert!(mi(&[0, 0]).is_canonical());
        assert!(mi(&[0, 2]).is_canonical());
        assert!(!mi(&[0, -2]).is_canonical());
        assert!(mi(&[1, -5]).is_canonical());
        assert!(!mi(&[-1, 5]).is_canonical());
        let (c, flipped) = mi(&[-1, 5]).canonical();
        assert_eq!(c, mi(&[1, -5]));
        assert!(flipped);
    }

    proptest! {
        #[test]
        fn basis_is_unit_modulus_and_conjugate_symmetric(
            x0 in -10.0f64..10.0, x1 in -10.0f64..10.0,
            a0 in -6i32..=6, a1 in -6i32..=6,
            d0 in 0.5f64..8.0, d1 in 0.5f64..8.0,
        ) {
            let dom = Domain::new(&[d0, d1]).unwrap();
            let alpha = mi(&[a0, a1]);
            let x = [x0, x1];
            let v = basis_eval(&x, &alpha, &dom);
            let w = basis_eval(&x, &-alpha, &dom);
            prop_assert!((v.norm() - 1.0).abs() <= 1e-14);
            prop_assert!((v - w.conj()).norm() <= 1e-12);
        }

        #[test]
        fn grow_contains_and_boundary_is_subset(picks in proptest::collection::vec((-4i32..=4, -4i32..=4), 1..12)) {
            let a = IndexSet::symmetric(2, picks.iter().map(|&(i, j)| mi(&[i, j])));
            let g = a.grow();
            prop_assert!(a.is_subset(&g));
            prop_assert!(g.len() > a.len()); // finite sets always gain a layer
            prop_assert!(a.boundary().is_subset(&a));
            // closure is preserved by growth
            for alpha in g.iter() {
                prop_assert!(g.contains(&-*alpha));
            }
        }
    }
}

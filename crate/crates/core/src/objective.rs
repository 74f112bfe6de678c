//! Regularized least-squares objective and its gradients.
//!
//! For measurements `(x_i, u_i)`, a divergence-free set `v` and a curl-free
//! set `s`, the objective is
//!
//! ```text
//! F = (1/P) sum_i |v(x_i) + s(x_i) - u_i|^2
//!   + eps_d * |v|^2_{Hk, k_d} + eps_c * |s|^2_{Hk, k_c}
//! ```
//!
//! The gradient with respect to a conjugated complex coefficient at index `a`
//! is `(2/P) sum_i conj(phi(x_i, a)) r_i + 2 eps (2 pi)^{2k} (ahat.ahat)^k v_a`
//! with `r_i` the residual at `x_i`. Projecting that onto the admissible
//! subspace directions gives the exact gradient in the reduced real
//! coordinates; the pair bookkeeping reduces to a factor two on nonzero
//! modes. The projection is exact because the parameterization is linear;
//! finite differences of [`objective`] pin the factors in the tests.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::constraints::{CoefficientSet, ConstraintKind};
use crate::exec;
use crate::spectral::{Domain, MultiIndex};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Scattered pointwise vector measurements on one domain.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    dom: Domain,
    points: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl MeasurementSet {
    pub fn new(dom: Domain, points: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidMeasurements(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidMeasurements("no measurements".into()));
        }
        for (i, (x, u)) in points.iter().zip(&values).enumerate() {
            if x.len() != dom.dim() || u.len() != dom.dim() {
                return Err(Error::InvalidMeasurements(format!(
                    "row {i} has dimension {}/{}, domain has {}",
                    x.len(),
                    u.len(),
                    dom.dim()
                )));
            }
            if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
                return Err(Error::InvalidMeasurements(format!(
                    "row {i} contains a non-finite value"
                )));
            }
        }
        Ok(Self {
            dom,
            points,
            values,
        })
    }

    pub fn dom(&self) -> &Domain {
        &self.dom
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Tikhonov weights and fractional Sobolev orders for the two components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regularization {
    pub eps_div: f64,
    pub k_div: f64,
    pub eps_curl: f64,
    pub k_curl: f64,
}

impl Regularization {
    pub fn new(eps_div: f64, k_div: f64, eps_curl: f64, k_curl: f64) -> Result<Self> {
        for (name, v) in [
            ("eps_div", eps_div),
            ("eps_curl", eps_curl),
            ("k_div", k_div),
            ("k_curl", k_curl),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            eps_div,
            k_div,
            eps_curl,
            k_curl,
        })
    }

    /// Warns when an order is too low for pointwise (Sobolev-embedded)
    /// evaluation: `k > 1` is needed in 2D, `k > 1.5` in 3D.
    pub fn warn_if_inadmissible(&self, dim: usize) {
        let floor = dim as f64 / 2.0;
        for (name, k) in [("k_div", self.k_div), ("k_curl", self.k_curl)] {
            if k <= floor {
                log::warn!(
                    "{name} = {k} is at or below n/2 = {floor}; pointwise evaluation \
                     is outside the embedding regime"
                );
            }
        }
    }

    pub(crate) fn for_kind(&self, kind: ConstraintKind) -> (f64, f64) {
        match kind {
            ConstraintKind::DivergenceFree => (self.eps_div, self.k_div),
            ConstraintKind::CurlFree => (self.eps_curl, self.k_curl),
        }
    }
}

fn check_domains(div: &CoefficientSet, curl: &CoefficientSet, m: &MeasurementSet) -> Result<()> {
    if div.dom() != curl.dom() || div.dom() != m.dom() {
        return Err(Error::DomainMismatch);
    }
    Ok(())
}

/// Residuals `v(x_i) + s(x_i) - u_i`, in measurement order.
fn residuals(div: &CoefficientSet, curl: &CoefficientSet, m: &MeasurementSet) -> Vec<Vec<f64>> {
    exec::map_indexed(m.len(), |i| {
        let x = &m.points()[i];
        let vd = div.evaluate(x);
        let vc = curl.evaluate(x);
        let u = &m.values()[i];
        (0..m.dom().dim()).map(|k| vd[k] + vc[k] - u[k]).collect()
    })
}

/// Value of the regularized objective.
pub fn objective(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    m: &MeasurementSet,
    reg: &Regularization,
) -> Result<f64> {
    check_domains(div, curl, m)?;
    let res = residuals(div, curl, m);
    let misfit = exec::sum_indexed(res.len(), |i| res[i].iter().map(|r| r * r).sum::<f64>())
        / m.len() as f64;
    Ok(misfit
        + reg.eps_div * div.seminorm_sq(reg.k_div)?
        + reg.eps_curl * curl.seminorm_sq(reg.k_curl)?)
}

/// Gradient of [`objective`] with respect to conjugated complex coefficients,
/// one complex vector per member index of each component.
#[derive(Clone, Debug)]
pub struct ComplexGradient {
    pub div: BTreeMap<MultiIndex, Vec<Complex64>>,
    pub curl: BTreeMap<MultiIndex, Vec<Complex64>>,
}

/// Per-member complex gradient for one component given precomputed residuals.
///
/// Canonical entries are computed directly, the rest by conjugation
/// (`G(-a) = conj(G(a))` because the residual field is real).
fn component_gradient(
    set: &CoefficientSet,
    m: &MeasurementSet,
    eps: f64,
    k: f64,
    res: &[Vec<f64>],
) -> BTreeMap<MultiIndex, Vec<Complex64>> {
    let dim = set.dim();
    let dom = set.dom().clone();
    let reps: Vec<MultiIndex> = set.indices().representatives().copied().collect();
    let two_over_p = 2.0 / m.len() as f64;

    let canonical: Vec<(MultiIndex, Vec<Complex64>)> = exec::map_indexed(reps.len(), |r| {
        let alpha = reps[r];
        let ahat = dom.scaled_index(&alpha);
        // (2/P) sum_i conj(phi(x_i, a)) r_i, blocked for determinism
        let flat = exec::sum_vectors(m.len(), 2 * dim, |i, acc| {
            let folded = dom.fold(&m.points()[i]);
            let mut phase = 0.0;
            for (x, a) in folded.iter().zip(ahat.iter()) {
                phase += x * a;
            }
            let (s, c) = (TWO_PI * phase).sin_cos();
            for kk in 0..dim {
                acc[2 * kk] += c * res[i][kk];
                acc[2 * kk + 1] += -s * res[i][kk];
            }
        });
        let nsq: f64 = ahat.iter().map(|v| v * v).sum();
        let ridge = 2.0 * eps * TWO_PI.powf(2.0 * k) * nsq.powf(k);
        let coeff = set.coefficient(&alpha).expect("member");
        let g = (0..dim)
            .map(|kk| {
                Complex64::new(two_over_p * flat[2 * kk], two_over_p * flat[2 * kk + 1])
                    + ridge * coeff[kk]
            })
            .collect();
        (alpha, g)
    });

    let mut out = BTreeMap::new();
    for (alpha, g) in canonical {
        if !alpha.is_zero() {
            out.insert(-alpha, g.iter().map(|c| c.conj()).collect());
        }
        out.insert(alpha, g);
    }
    out
}

/// Wirtinger gradient of the objective per member index of both components.
pub fn complex_gradient(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    m: &MeasurementSet,
    reg: &Regularization,
) -> Result<ComplexGradient> {
    check_domains(div, curl, m)?;
    let res = residuals(div, curl, m);
    Ok(ComplexGradient {
        div: component_gradient(div, m, reg.eps_div, reg.k_div, &res),
        curl: component_gradient(curl, m, reg.eps_curl, reg.k_curl, &res),
    })
}

/// Projects one component's complex gradient onto its packed layout.
fn project_reduced(set: &CoefficientSet, grad: &BTreeMap<MultiIndex, Vec<Complex64>>) -> Vec<f64> {
    let dim = set.dim();
    let mut out = Vec::with_capacity(set.reduced_dim());
    if set.zero_mode().is_some() {
        let g0 = grad
            .get(&MultiIndex::zero(dim))
            .expect("zero member gradient");
        out.extend(g0.iter().map(|c| c.re));
    }
    for alpha in set.indices().representatives().filter(|a| !a.is_zero()) {
        let g = &grad[alpha];
        let basis = set.pair_basis(alpha).expect("canonical member");
        for j in 0..basis.count() {
            let mut proj = Complex64::new(0.0, 0.0);
            for (k, &b) in basis.vector(j).iter().enumerate() {
                proj += g[k] * b;
            }
            // the conjugate pair doubles every nonzero-mode derivative
            out.push(2.0 * proj.re);
            out.push(2.0 * proj.im);
        }
    }
    out
}

/// Exact gradient of the objective in the packed real coordinates of the two
/// components (divergence-free first).
pub fn reduced_gradient(
    div: &CoefficientSet,
    curl: &CoefficientSet,
    m: &MeasurementSet,
    reg: &Regularization,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = complex_gradient(div, curl, m, reg)?;
    Ok((project_reduced(div, &g.div), project_reduced(curl, &g.curl)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::IndexSet;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mi(e: &[i32]) -> MultiIndex {
        MultiIndex::new(e)
    }

    fn small_problem(seed: u64) -> (CoefficientSet, CoefficientSet, MeasurementSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let div = CoefficientSet::zeros(
            ConstraintKind::DivergenceFree,
            dom.clone(),
            IndexSet::cube(2, 1),
        )
        .unwrap();
        let curl =
            CoefficientSet::zeros(ConstraintKind::CurlFree, dom.clone(), IndexSet::cube(2, 1))
                .unwrap();
        let p = 12;
        let points: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..2).map(|_| rng.gen::<f64>() * 2.0 * PI).collect())
            .collect();
        let values: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let m = MeasurementSet::new(dom, points, values).unwrap();
        (div, curl, m)
    }

    #[test]
    fn zero_coefficients_objective_is_data_power() {
        let (div, curl, m) = small_problem(1);
        let reg = Regularization::new(1e-3, 1.5, 1e-3, 1.5).unwrap();
        let want = m
            .values()
            .iter()
            .map(|u| u.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / m.len() as f64;
        assert_abs_diff_eq!(
            objective(&div, &curl, &m, &reg).unwrap(),
            want,
            epsilon = 1e-14
        );
    }

    #[test]
    fn exact_interpolant_with_zero_regularization_is_zero() {
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let mut div = CoefficientSet::zeros(
            ConstraintKind::DivergenceFree,
            dom.clone(),
            IndexSet::cube(2, 1),
        )
        .unwrap();
        div.set_zero_mode(&[0.4, -0.9]).unwrap();
        div.set_pair_scalars(&mi(&[1, 0]), &[Complex64::new(0.3, 0.1)])
            .unwrap();
        let curl =
            CoefficientSet::zeros(ConstraintKind::CurlFree, dom.clone(), IndexSet::cube(2, 1))
                .unwrap();
        let points: Vec<Vec<f64>> = vec![vec![0.3, 1.0], vec![2.0, 4.0], vec![5.5, 0.1]];
        let values: Vec<Vec<f64>> = points.iter().map(|x| div.evaluate(x)).collect();
        let m = MeasurementSet::new(dom, points, values).unwrap();
        let reg = Regularization::new(0.0, 1.5, 0.0, 1.5).unwrap();
        assert_abs_diff_eq!(
            objective(&div, &curl, &m, &reg).unwrap(),
            0.0,
            epsilon = 1e-24
        );
    }

    #[test]
    fn zero_data_objective_sums_field_power_and_seminorms() {
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let base = CoefficientSet::zeros(
            ConstraintKind::DivergenceFree,
            dom.clone(),
            IndexSet::cube(2, 1),
        )
        .unwrap();
        let n = base.reduced_dim();
        let div = base
            .with_packed(&(0..n).map(|i| (i as f64 * 0.4).sin()).collect::<Vec<_>>())
            .unwrap();
        let curl =
            CoefficientSet::zeros(ConstraintKind::CurlFree, dom.clone(), IndexSet::cube(2, 1))
                .unwrap();
        let points: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0, 0.5]];
        let values = vec![vec![0.0, 0.0]; 2];
        let m = MeasurementSet::new(dom, points.clone(), values).unwrap();
        let reg = Regularization::new(2e-3, 1.5, 1e-3, 1.2).unwrap();
        let field_power = points
            .iter()
            .map(|x| div.evaluate(x).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 2.0;
        let want = field_power
            + reg.eps_div * div.seminorm_sq(reg.k_div).unwrap()
            + reg.eps_curl * curl.seminorm_sq(reg.k_curl).unwrap();
        assert_abs_diff_eq!(objective(&div, &curl, &m, &reg).unwrap(), want, epsilon = 1e-13);
    }

    #[test]
    fn gradient_at_zero_is_projected_data_correlation() {
        let (div, curl, m) = small_problem(7);
        let reg = Regularization::new(1e-4, 1.5, 1e-4, 1.5).unwrap();
        let g = complex_gradient(&div, &curl, &m, &reg).unwrap();
        // at zero coefficients the residual is -u, so the gradient at alpha
        // is -(2/P) sum conj(phi(x_i, a)) u_i
        for (alpha, got) in &g.div {
            let mut want = vec![Complex64::new(0.0, 0.0); 2];
            for (x, u) in m.points().iter().zip(m.values()) {
                let phi = crate::spectral::basis_eval(x, alpha, m.dom()).conj();
                for k in 0..2 {
                    want[k] += -phi * u[k] * (2.0 / m.len() as f64);
                }
            }
            for k in 0..2 {
                assert_abs_diff_eq!(got[k].re, want[k].re, epsilon = 1e-12);
                assert_abs_diff_eq!(got[k].im, want[k].im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_mode_gradient_carries_no_ridge() {
        let (div, curl, m) = small_problem(3);
        let div = div.with_packed(&vec![0.5; div.reduced_dim()]).unwrap();
        let big = Regularization::new(1e6, 1.5, 1e6, 1.5).unwrap();
        let none = Regularization::new(0.0, 1.5, 0.0, 1.5).unwrap();
        let g_big = complex_gradient(&div, &curl, &m, &big).unwrap();
        let g_none = complex_gradient(&div, &curl, &m, &none).unwrap();
        let zero = MultiIndex::zero(2);
        for k in 0..2 {
            assert_abs_diff_eq!(
                g_big.div[&zero][k].re,
                g_none.div[&zero][k].re,
                epsilon = 1e-12
            );
        }
    }

    fn fd_check(seed: u64, reg: &Regularization) -> f64 {
        let (div, curl, m) = small_problem(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let nd = div.reduced_dim();
        let nc = curl.reduced_dim();
        let td: Vec<f64> = (0..nd).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let tc: Vec<f64> = (0..nc).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let div = div.with_packed(&td).unwrap();
        let curl = curl.with_packed(&tc).unwrap();
        let (gd, gc) = reduced_gradient(&div, &curl, &m, reg).unwrap();

        let mut worst: f64 = 0.0;
        let eval = |td: &[f64], tc: &[f64]| {
            let d = div.with_packed(td).unwrap();
            let c = curl.with_packed(tc).unwrap();
            objective(&d, &c, &m, reg).unwrap()
        };
        for j in 0..nd {
            let h = 1e-6 * (1.0 + td[j].abs());
            let mut plus = td.clone();
            plus[j] += h;
            let mut minus = td.clone();
            minus[j] -= h;
            let fd = (eval(&plus, &tc) - eval(&minus, &tc)) / (2.0 * h);
            worst = worst.max((gd[j] - fd).abs() / (1.0 + fd.abs()));
        }
        for j in 0..nc {
            let h = 1e-6 * (1.0 + tc[j].abs());
            let mut plus = tc.clone();
            plus[j] += h;
            let mut minus = tc.clone();
            minus[j] -= h;
            let fd = (eval(&td, &plus) - eval(&td, &minus)) / (2.0 * h);
            worst = worst.max((gc[j] - fd).abs() / (1.0 + fd.abs()));
        }
        worst
    }

    #[test]
    fn reduced_gradient_matches_finite_differences() {
        let reg = Regularization::new(1e-3, 1.5, 5e-4, 1.2).unwrap();
        for seed in 0..5 {
            let worst = fd_check(seed, &reg);
            assert!(worst <= 1e-6, "seed {seed}: fd mismatch {worst:.3e}");
        }
    }

    #[test]
    fn pure_regularization_gradient_is_linear_closed_form() {
        // the ridge part of the reduced gradient is
        // 4 eps (2 pi)^{2k} (ahat.ahat)^k theta_j on every pair entry
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let idx = IndexSet::symmetric(2, [mi(&[1, 0]), mi(&[0, 2])]);
        let base = CoefficientSet::zeros(ConstraintKind::CurlFree, dom.clone(), idx).unwrap();
        let theta: Vec<f64> = (1..=base.reduced_dim()).map(|i| i as f64 * 0.1).collect();
        let curl = base.with_packed(&theta).unwrap();
        let div = CoefficientSet::zeros(
            ConstraintKind::DivergenceFree,
            dom.clone(),
            IndexSet::symmetric(2, [MultiIndex::zero(2)]),
        )
        .unwrap();
        let m =
            MeasurementSet::new(dom.clone(), vec![vec![0.0, 0.0]], vec![vec![0.0, 0.0]]).unwrap();
        let eps = 0.01;
        let k = 1.5;
        let reg = Regularization::new(0.0, 1.5, eps, k).unwrap();
        let (_, gc) = reduced_gradient(&div, &curl, &m, &reg).unwrap();
        // isolate the ridge by subtracting the same gradient with eps = 0
        let reg0 = Regularization::new(0.0, 1.5, 0.0, k).unwrap();
        let (_, gc0) = reduced_gradient(&div, &curl, &m, &reg0).unwrap();
        let mut want = Vec::new();
        let mut it = theta.iter();
        for alpha in [mi(&[0, 2]), mi(&[1, 0])] {
            // canonical members in lexicographic order: (0,2) < (1,0)
            let nsq = dom.scaled_norm_sq(&alpha);
            let w = 4.0 * eps * TWO_PI.powf(2.0 * k) * nsq.powf(k);
            want.push(w * it.next().unwrap());
            want.push(w * it.next().unwrap());
        }
        for j in 0..gc.len() {
            assert_abs_diff_eq!(gc[j] - gc0[j], want[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_everywhere_gradient_is_zero() {
        let dom = Domain::cube(2, 2.0 * PI).unwrap();
        let div = CoefficientSet::zeros(
            ConstraintKind::DivergenceFree,
            dom.clone(),
            IndexSet::cube(2, 1),
        )
        .unwrap();
        let curl =
            CoefficientSet::zeros(ConstraintKind::CurlFree, dom.clone(), IndexSet::cube(2, 1))
                .unwrap();
        let m = MeasurementSet::new(dom, vec![vec![1.0, 1.0]], vec![vec![0.0, 0.0]]).unwrap();
        let reg = Regularization::new(1.0, 1.5, 1.0, 1.5).unwrap();
        let (gd, gc) = reduced_gradient(&div, &curl, &m, &reg).unwrap();
        assert!(gd.iter().all(|&g| g == 0.0));
        assert!(gc.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn objective_is_convex_along_segments() {
        let (div, curl, m) = small_problem(11);
        let reg = Regularization::new(1e-3, 1.5, 1e-3, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let nd = div.reduced_dim();
        let nc = curl.reduced_dim();
        for _ in 0..10 {
            let t1: Vec<f64> = (0..nd + nc).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let t2: Vec<f64> = (0..nd + nc).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let t: f64 = rng.gen();
            let mix: Vec<f64> = t1
                .iter()
                .zip(&t2)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            let f = |theta: &[f64]| {
                let d = div.with_packed(&theta[..nd]).unwrap();
                let c = curl.with_packed(&theta[nd..]).unwrap();
                objective(&d, &c, &m, &reg).unwrap()
            };
            let scale = 1.0 + f(&t1).abs() + f(&t2).abs();
            assert!(f(&mix) <= t * f(&t1) + (1.0 - t) * f(&t2) + 1e-10 * scale);
        }
    }

    #[test]
    fn measurement_set_validates_rows() {
        let dom = Domain::cube(2, 1.0).unwrap();
        assert!(MeasurementSet::new(dom.clone(), vec![], vec![]).is_err());
        assert!(MeasurementSet::new(
            dom.clone(),
            vec![vec![0.0, 0.0]],
            vec![vec![f64::NAN, 0.0]]
        )
        .is_err());
        assert!(MeasurementSet::new(dom, vec![vec![0.0]], vec![vec![0.0, 0.0]]).is_err());
    }
}

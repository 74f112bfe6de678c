//! Closed-form test fields with known divergence- and curl-free parts,
//! and seeded random sampling.
//!
//! The building blocks are Gaussian bumps `psi(x; x0) = exp(-|x - x0|^2 / 2)`:
//! the rotated gradient `((x2-x02) psi, -(x1-x01) psi)` is a divergence-free
//! vortex, the gradient `-(x - x0) psi` is a curl-free source/sink. The named
//! variants combine these with trigonometric vortex arrays on their standard
//! boxes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::objective::MeasurementSet;
use crate::spectral::Domain;
use crate::Result;

/// Gaussian bump centered at `x0`.
pub fn gaussian_psi(x: &[f64], x0: &[f64]) -> f64 {
    let rsq: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
    (-0.5 * rsq).exp()
}

/// Divergence-free vortex blob `(-d2 psi, d1 psi)` (2D).
pub fn gaussian_vortex(x: &[f64], x0: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), 2, "the vortex blob is two-dimensional");
    let psi = gaussian_psi(x, x0);
    vec![(x[1] - x0[1]) * psi, -(x[0] - x0[0]) * psi]
}

/// Curl-free source blob `grad psi = -(x - x0) psi` (any dimension).
pub fn gaussian_source(x: &[f64], x0: &[f64]) -> Vec<f64> {
    let psi = gaussian_psi(x, x0);
    x.iter().zip(x0).map(|(a, b)| -(a - b) * psi).collect()
}

/// Analytic fields with exact Helmholtz-Hodge parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticField {
    /// Counter-rotating Gaussian vortex row plus corner sources and interior
    /// sinks on `[0, 3 pi]^2`.
    CounterRotating,
    /// Two-scale trigonometric vortex array plus a central Gaussian sink on
    /// `[0, 2 pi]^2`.
    TwoScaleSource2D,
    /// Three-dimensional extension of the two-scale field on `[0, 2 pi]^3`.
    TwoScaleSource3D,
}

impl AnalyticField {
    pub fn dim(&self) -> usize {
        match self {
            AnalyticField::TwoScaleSource3D => 3,
            _ => 2,
        }
    }

    /// The box each variant is defined on.
    pub fn domain(&self) -> Domain {
        let d = match self {
            AnalyticField::CounterRotating => 3.0 * std::f64::consts::PI,
            _ => 2.0 * std::f64::consts::PI,
        };
        Domain::cube(self.dim(), d).expect("valid box")
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticField::CounterRotating => "counter-rotating",
            AnalyticField::TwoScaleSource2D => "two-scale-2d",
            AnalyticField::TwoScaleSource3D => "two-scale-3d",
        }
    }

    /// Parses the CLI-facing variant name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "counter-rotating" => Some(AnalyticField::CounterRotating),
            "two-scale-2d" => Some(AnalyticField::TwoScaleSource2D),
            "two-scale-3d" => Some(AnalyticField::TwoScaleSource3D),
            _ => None,
        }
    }

    /// Exact divergence-free part.
    pub fn div_part(&self, x: &[f64]) -> Vec<f64> {
        match self {
            AnalyticField::CounterRotating => {
                let d = 3.0 * std::f64::consts::PI;
                let centers = [
                    (-1.0, [d / 8.0, d / 2.0]),
                    (1.0, [3.0 * d / 8.0, d / 2.0]),
                    (-1.0, [5.0 * d / 8.0, d / 2.0]),
                    (1.0, [7.0 * d / 8.0, d / 2.0]),
                    (1.0, [-d / 8.0, d / 2.0]),
                    (-1.0, [9.0 * d / 8.0, d / 2.0]),
                ];
                let mut out = vec![0.0; 2];
                for (sign, c) in centers {
                    let v = gaussian_vortex(x, &c);
                    out[0] += sign * v[0];
                    out[1] += sign * v[1];
                }
                out
            }
            AnalyticField::TwoScaleSource2D => {
                let (x1, x2) = (x[0], x[1]);
                vec![
                    0.5 * (x1.cos() * x2.sin() + (2.0 * x1).cos() * (2.0 * x2).sin()),
                    0.5 * (-x1.sin() * x2.cos() - (2.0 * x1).sin() * (2.0 * x2).cos()),
                ]
            }
            AnalyticField::TwoScaleSource3D => {
                let (x1, x2, x3) = (x[0], x[1], x[2]);
                let s = x3.sin() - 0.5 * (2.0 * x3).sin();
                vec![
                    0.5 * (x1.cos() * x2.sin() * x3.cos()
                        + (2.0 * x1).cos() * (2.0 * x2).sin() * x3.cos()),
                    0.5 * (-x1.sin() * x2.cos() * x3.cos()
                        - (2.0 * x1).sin() * (2.0 * x2).cos() * (2.0 * x3).cos()),
                    0.5 * (x1.sin() * x2.sin() * s
                        + 2.0 * (2.0 * x1).sin() * (2.0 * x2).sin() * s)
                        - (0.5 * x3.sin() - 0.25 * (2.0 * x3).sin()) * x1.sin() * x2.sin(),
                ]
            }
        }
    }

    /// Exact curl-free part.
    pub fn curl_part(&self, x: &[f64]) -> Vec<f64> {
        match self {
            AnalyticField::CounterRotating => {
                let d = 3.0 * std::f64::consts::PI;
                let centers = [
                    (1.0, [0.0, 0.0]),
                    (1.0, [d, d]),
                    (1.0, [0.0, d]),
                    (1.0, [d, 0.0]),
                    (-1.0, [d / 2.0, d / 4.0]),
                    (-1.0, [d / 2.0, 3.0 * d / 4.0]),
                    (-1.0, [d / 2.0, -d / 4.0]),
                    (-1.0, [d / 2.0, 5.0 * d / 4.0]),
                ];
                let mut out = vec![0.0; 2];
                for (sign, c) in centers {
                    let v = gaussian_source(x, &c);
                    out[0] += sign * v[0];
                    out[1] += sign * v[1];
                }
                out
            }
            AnalyticField::TwoScaleSource2D => {
                let pi = std::f64::consts::PI;
                gaussian_source(x, &[pi, pi])
                    .into_iter()
                    .map(|v| -v)
                    .collect()
            }
            AnalyticField::TwoScaleSource3D => {
                let pi = std::f64::consts::PI;
                gaussian_source(x, &[pi, pi, pi])
                    .into_iter()
                    .map(|v| -v)
                    .collect()
            }
        }
    }

    /// Total field: divergence-free part plus curl-free part.
    pub fn total(&self, x: &[f64]) -> Vec<f64> {
        let d = self.div_part(x);
        let c = self.curl_part(x);
        d.iter().zip(&c).map(|(a, b)| a + b).collect()
    }
}

/// Samples the field at `p` uniform points of the box, exactly (no noise),
/// with a platform-independent seeded generator.
pub fn sample_random(
    field: &AnalyticField,
    dom: &Domain,
    p: usize,
    seed: u64,
) -> Result<MeasurementSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(p);
    let mut values = Vec::with_capacity(p);
    for _ in 0..p {
        let x: Vec<f64> = dom
            .lengths()
            .iter()
            .map(|&d| rng.gen::<f64>() * d)
            .collect();
        values.push(field.total(&x));
        points.push(x);
    }
    MeasurementSet::new(dom.clone(), points, values)
}

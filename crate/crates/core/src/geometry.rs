//! Tensor-product B-spline and NURBS geometry maps `G: (0,1)^d -> Ω`.
//!
//! Control points and weights are stored row-major with the last parametric
//! index fastest, the same layout the geometry file uses:
//! control point `(i_1, ..., i_d)` sits at `((i_1 n_2 + i_2) n_3 + ...) + i_d`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{basis_derivatives, find_span};

/// A (rational) tensor-product spline patch.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    dim: usize,
    degrees: Vec<usize>,
    knots: Vec<Vec<f64>>,
    control_points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    identity: bool,
}

/// Point value and first/second derivatives of a geometry map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySample {
    pub dim: usize,
    pub point: [f64; 3],
    /// `jacobian[c][k] = ∂G_c / ∂x̂_k`
    pub jacobian: [[f64; 3]; 3],
    /// `hessians[c][k][l] = ∂²G_c / ∂x̂_k ∂x̂_l`
    pub hessians: [[[f64; 3]; 3]; 3],
    pub det: f64,
}

impl GeometrySample {
    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }
}

/// Named domains available without a geometry file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinDomain {
    UnitSquare,
    UnitCube,
    QuarterAnnulus2d,
    QuarterAnnulus3d,
}

impl BuiltinDomain {
    pub const ALL: [BuiltinDomain; 4] = [
        BuiltinDomain::UnitSquare,
        BuiltinDomain::UnitCube,
        BuiltinDomain::QuarterAnnulus2d,
        BuiltinDomain::QuarterAnnulus3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinDomain::UnitSquare => "unit-square",
            BuiltinDomain::UnitCube => "unit-cube",
            BuiltinDomain::QuarterAnnulus2d => "quarter-annulus-2d",
            BuiltinDomain::QuarterAnnulus3d => "quarter-annulus-3d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            BuiltinDomain::UnitSquare | BuiltinDomain::QuarterAnnulus2d => 2,
            BuiltinDomain::UnitCube | BuiltinDomain::QuarterAnnulus3d => 3,
        }
    }

    pub fn build(self) -> GeometryMap {
        match self {
            BuiltinDomain::UnitSquare => GeometryMap::identity(2),
            BuiltinDomain::UnitCube => GeometryMap::identity(3),
            BuiltinDomain::QuarterAnnulus2d => quarter_annulus(false),
            BuiltinDomain::QuarterAnnulus3d => quarter_annulus(true),
        }
    }
}

impl fmt::Display for BuiltinDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown domain '{s}'")))
    }
}

/// Built-in domain by name.
pub fn builtin_domain(name: &str) -> Result<GeometryMap> {
    Ok(name.parse::<BuiltinDomain>()?.build())
}

/// Quarter annulus with radii 1/2 and 1 in the first quadrant, as a NURBS
/// patch of degree 2 in angle and 1 in radius. The first parameter runs
/// clockwise from the y-axis to the x-axis, the second radially outward.
/// The 3D variant extrudes it along z to height 1.
fn quarter_annulus(extrude: bool) -> GeometryMap {
    let radii = [0.5, 1.0];
    let arc = [[0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
    let arc_weights = [1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0];
    let quad = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let lin = vec![0.0, 0.0, 1.0, 1.0];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (q, w) in arc.iter().zip(arc_weights) {
        for r in radii {
            if extrude {
                for z in [0.0, 1.0] {
                    points.push(vec![r * q[0], r * q[1], z]);
                    weights.push(w);
                }
            } else {
                points.push(vec![r * q[0], r * q[1]]);
                weights.push(w);
            }
        }
    }
    let (degrees, knots) = if extrude {
        (vec![2, 1, 1], vec![quad, lin.clone(), lin])
    } else {
        (vec![2, 1], vec![quad, lin])
    };
    GeometryMap::new(degrees, knots, points, Some(weights)).expect("built-in annulus is valid")
}

impl GeometryMap {
    pub fn new(
        degrees: Vec<usize>,
        knots: Vec<Vec<f64>>,
        control_points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = degrees.len();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(2..=3).contains(&dim) {
            return bad(format!("dim must be 2 or 3, got {dim}"));
        }
        if knots.len() != dim {
            return bad(format!("expected {dim} knot vectors, got {}", knots.len()));
        }
        let mut counts = Vec::with_capacity(dim);
        for (k, (kv, &p)) in knots.iter().zip(&degrees).enumerate() {
            if p < 1 {
                return bad(format!("degrees[{k}] must be at least 1"));
            }
            if kv.len() < 2 * (p + 1) {
                return bad(format!("knots[{k}] needs at least {} entries", 2 * (p + 1)));
            }
            if kv.iter().any(|v| !v.is_finite()) || kv.windows(2).any(|w| w[0] > w[1]) {
                return bad(format!("knots[{k}] must be finite and nondecreasing"));
            }
            let n = kv.len() - p - 1;
            if kv[..=p].iter().any(|&v| v != 0.0) || kv[n..].iter().any(|&v| v != 1.0) {
                return bad(format!("knots[{k}] must be clamped to [0, 1]"));
            }
            counts.push(n);
        }
        let total: usize = counts.iter().product();
        if control_points.len() != total {
            return bad(format!(
                "expected {total} control points for counts {counts:?}, got {}",
                control_points.len()
            ));
        }
        if let Some((i, _)) = control_points
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != dim || c.iter().any(|v| !v.is_finite()))
        {
            return bad(format!("control_points[{i}] must hold {dim} finite coordinates"));
        }
        if let Some(w) = &weights {
            if w.len() != total {
                return bad(format!("expected {total} weights, got {}", w.len()));
            }
            if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
                return bad(format!("weights[{i}] = {v} must be positive"));
            }
        }
        let identity = degrees.iter().all(|&p| p == 1)
            && knots.iter().all(|k| k == &[0.0, 0.0, 1.0, 1.0])
            && weights.as_ref().map_or(true, |w| w.iter().all(|&v| v == w[0]))
            && control_points.iter().enumerate().all(|(i, c)| {
                (0..dim).all(|k| {
                    let bit = (i >> (dim - 1 - k)) & 1;
                    c[k] == bit as f64
                })
            });
        Ok(Self {
            dim,
            degrees,
            knots,
            control_points,
            weights,
            identity,
        })
    }

    /// The identity map on `(0,1)^d` as a bilinear/trilinear patch.
    pub fn identity(dim: usize) -> Self {
        let points = (0..1usize << dim)
            .map(|i| (0..dim).map(|k| ((i >> (dim - 1 - k)) & 1) as f64).collect())
            .collect();
        Self::new(vec![1; dim], vec![vec![0.0, 0.0, 1.0, 1.0]; dim], points, None).expect("identity map is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn knots(&self) -> &[Vec<f64>] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Vec<f64>] {
        &self.control_points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// True when the map is exactly `G(x) = x`.
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Applies an affine map `x -> scale * x + shift` to the control points.
    pub fn affine_image(&self, scale: f64, shift: f64) -> Result<Self> {
        let points = self
            .control_points
            .iter()
            .map(|c| c.iter().map(|v| scale * v + shift).collect())
            .collect();
        Self::new(self.degrees.clone(), self.knots.clone(), points, self.weights.clone())
    }

    /// Point, Jacobian and Hessians at `x`; fails where `det J <= 0`.
    pub fn eval(&self, x: &[f64]) -> Result<GeometrySample> {
        let s = self.eval_unchecked(x)?;
        if !(s.det > 0.0) {
            return Err(Error::SingularGeometry {
                point: x.to_vec(),
                det: s.det,
            });
        }
        Ok(s)
    }

    /// Like [`GeometryMap::eval`] but returns the sample whatever the sign of
    /// the Jacobian determinant.
    pub fn eval_unchecked(&self, x: &[f64]) -> Result<GeometrySample> {
        let d = self.dim;
        if x.len() != d {
            return Err(Error::ShapeMismatch { expected: d, found: x.len() });
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("parameter {v} outside [0, 1]")));
        }
        let mut spans = [0usize; 3];
        let mut ders: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d);
        for k in 0..d {
            let p = self.degrees[k];
            spans[k] = find_span(&self.knots[k], p, x[k]);
            ders.push(basis_derivatives(&self.knots[k], p, spans[k], x[k], 2));
        }
        let counts: Vec<usize> = (0..d).map(|k| self.knots[k].len() - self.degrees[k] - 1).collect();

        // homogeneous sums: index 0..d are the weighted coordinates, d the weight
        let mut val = [0.0f64; 4];
        let mut grad = [[0.0f64; 3]; 4];
        let mut hess = [[[0.0f64; 3]; 3]; 4];
        let local: Vec<usize> = (0..d).map(|k| self.degrees[k] + 1).collect();
        let nloc: usize = local.iter().product();
        let mut idx = [0usize; 3];
        for flat in 0..nloc {
            let mut rem = flat;
            for k in (0..d).rev() {
                idx[k] = rem % local[k];
                rem /= local[k];
            }
            let mut global = 0;
            for k in 0..d {
                global = global * counts[k] + (spans[k] - self.degrees[k] + idx[k]);
            }
            let w = self.weights.as_ref().map_or(1.0, |w| w[global]);
            let cp = &self.control_points[global];
            // tensor basis value and derivatives
            let mut b0 = 1.0;
            for k in 0..d {
                b0 *= ders[k][0][idx[k]];
            }
            let mut b1 = [0.0; 3];
            let mut b2 = [[0.0; 3]; 3];
            for a in 0..d {
                let mut v = 1.0;
                for k in 0..d {
                    v *= ders[k][if k == a { 1 } else { 0 }][idx[k]];
                }
                b1[a] = v;
                for b in a..d {
                    let mut v = 1.0;
                    for k in 0..d {
                        let order = (k == a) as usize + (k == b) as usize;
                        v *= ders[k][order][idx[k]];
                    }
                    b2[a][b] = v;
                    b2[b][a] = v;
                }
            }
            for c in 0..=d {
                let coef = if c < d { w * cp[c] } else { w };
                val[c] += coef * b0;
                for a in 0..d {
                    grad[c][a] += coef * b1[a];
                    for b in 0..d {
                        hess[c][a][b] += coef * b2[a][b];
                    }
                }
            }
        }

        // quotient rule: G = A / W
        let wv = val[d];
        let mut s = GeometrySample {
            dim: d,
            point: [0.0; 3],
            jacobian: [[0.0; 3]; 3],
            hessians: [[[0.0; 3]; 3]; 3],
            det: 0.0,
        };
        for c in 0..d {
            let g = val[c] / wv;
            s.point[c] = g;
            for a in 0..d {
                s.jacobian[c][a] = (grad[c][a] - grad[d][a] * g) / wv;
            }
        }
        for c in 0..d {
            for a in 0..d {
                for b in 0..d {
                    s.hessians[c][a][b] = (hess[c][a][b]
                        - hess[d][a][b] * s.point[c]
                        - grad[d][a] * s.jacobian[c][b]
                        - grad[d][b] * s.jacobian[c][a])
                        / wv;
                }
            }
        }
        s.det = determinant(&s.jacobian, d);
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(e) => Error::GeometryFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            },
            Error::InvalidArgument(m) => Error::GeometryFile {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GeometryFile = serde_json::from_str(text)?;
        if f.dim != f.degrees.len() {
            return Err(Error::InvalidArgument(format!(
                "dim = {} disagrees with {} degrees",
                f.dim,
                f.degrees.len()
            )));
        }
        Self::new(f.degrees, f.knots, f.control_points, f.weights)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = GeometryFile {
            dim: self.dim,
            degrees: self.degrees.clone(),
            knots: self.knots.clone(),
            weights: self.weights.clone(),
            control_points: self.control_points.clone(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }
}

/// On-disk geometry format (UTF-8 JSON).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    dim: usize,
    degrees: Vec<usize>,
    knots: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    control_points: Vec<Vec<f64>>,
}

pub(crate) fn determinant(j: &[[f64; 3]; 3], d: usize) -> f64 {
    match d {
        1 => j[0][0],
        2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
        _ => {
            j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
        }
    }
}

/// Inverse of the leading `d x d` block.
pub(crate) fn inverse(j: &[[f64; 3]; 3], d: usize) -> [[f64; 3]; 3] {
    let det = determinant(j, d);
    let mut inv = [[0.0; 3]; 3];
    if d == 2 {
        inv[0][0] = j[1][1] / det;
        inv[0][1] = -j[0][1] / det;
        inv[1][0] = -j[1][0] / det;
        inv[1][1] = j[0][0] / det;
    } else {
        for r in 0..3 {
            for c in 0..3 {
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                inv[r][c] = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
            }
        }
    }
    inv
}

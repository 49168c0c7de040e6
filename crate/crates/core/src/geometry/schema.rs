//! On-disk body descriptions.
//!
//! Bodies serialize to a small tagged JSON object, e.g.
//!
//! ```json
//! { "dim": 2, "type": "hpolytope", "halfspaces": [[1.0, 0.0], [0.0, 1.0]] }
//! ```
//!
//! The five closed-form representations round-trip bit-exactly. Polar wrappers
//! have no on-disk form (serialize the underlying body and take the polar
//! after loading); attempting to serialize one fails with
//! [`Error::NotSerializable`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ConvexBody, Rep};

/// Serializable description of a convex body.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodySpec {
    pub dim: usize,
    #[serde(flatten)]
    kind: Kind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Kind {
    HPolytope { halfspaces: Vec<Vec<f64>> },
    VPolytope { vertices: Vec<Vec<f64>> },
    Ellipsoid { matrix: Vec<Vec<f64>> },
    LpBall { matrix: Vec<Vec<f64>>, p: f64 },
    PowerSum { halfspaces: Vec<Vec<f64>>, s: f64 },
}

fn rows_to_vectors(rows: &[Vec<f64>]) -> Vec<DVector<f64>> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}

fn vectors_to_rows(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.as_slice().to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidBody(format!("matrix must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect()).collect()
}

impl BodySpec {
    /// Validates and builds the body this spec describes.
    pub fn build(&self) -> Result<ConvexBody> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::InvalidBody("dimension must be positive".into()));
        }
        match &self.kind {
            Kind::HPolytope { halfspaces } => ConvexBody::hpolytope(rows_to_vectors(halfspaces)),
            Kind::VPolytope { vertices } => ConvexBody::vpolytope(rows_to_vectors(vertices)),
            Kind::Ellipsoid { matrix } => ConvexBody::ellipsoid(rows_to_matrix(matrix, n)?),
            Kind::LpBall { matrix, p } => ConvexBody::lp_ball(rows_to_matrix(matrix, n)?, *p),
            Kind::PowerSum { halfspaces, s } => ConvexBody::power_sum(rows_to_vectors(halfspaces), *s),
        }
        .and_then(|b| {
            if b.dim() != n {
                Err(Error::DimensionMismatch { expected: n, got: b.dim() })
            } else {
                Ok(b)
            }
        })
    }
}

impl ConvexBody {
    /// Serializable description; fails for polar wrappers, which have no
    /// closed on-disk form.
    pub fn to_spec(&self) -> Result<BodySpec> {
        let kind = match &self.rep {
            Rep::HPolytope { functionals } => Kind::HPolytope { halfspaces: vectors_to_rows(functionals) },
            Rep::VPolytope { vertices } => Kind::VPolytope { vertices: vectors_to_rows(vertices) },
            Rep::Ellipsoid { a, .. } => Kind::Ellipsoid { matrix: matrix_to_rows(a) },
            Rep::LpBall { a, p, .. } => Kind::LpBall { matrix: matrix_to_rows(a), p: *p },
            Rep::PowerSum { functionals, s } => {
                Kind::PowerSum { halfspaces: vectors_to_rows(functionals), s: *s }
            }
            Rep::PolarDual { .. } => return Err(Error::NotSerializable),
        };
        Ok(BodySpec { dim: self.dim, kind })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_spec()?)?)
    }

    pub fn from_json(text: &str) -> Result<ConvexBody> {
        let spec: BodySpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<ConvexBody> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn round_trip(body: &ConvexBody) -> ConvexBody {
        let json = body.to_json().unwrap();
        ConvexBody::from_json(&json).unwrap()
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let bodies = [
            ConvexBody::cube(3),
            ConvexBody::cross_polytope(2),
            ConvexBody::ellipsoid_diag(&[2.0, 1.0, 0.5]).unwrap(),
            ConvexBody::lp_ball_unit(2, 1.5).unwrap(),
            ConvexBody::regular_polygon(6).unwrap().smoothed(8.0).unwrap(),
        ];
        for body in &bodies {
            let back = round_trip(body);
            // Same JSON again means the numeric payload survived exactly.
            assert_eq!(body.to_json().unwrap(), back.to_json().unwrap());
            assert_eq!(body.dim(), back.dim());
            assert_eq!(body.kind(), back.kind());
        }
    }

    #[test]
    fn parses_handwritten_specs() {
        let body = ConvexBody::from_json(
            r#"{ "dim": 2, "type": "hpolytope", "halfspaces": [[1, 0], [0, 1]] }"#,
        )
        .unwrap();
        assert_eq!(body.kind(), "hpolytope");
        assert_eq!(body.gauge(&dvector![0.5, 0.25]).unwrap(), 0.5);

        let ball = ConvexBody::from_json(
            r#"{ "dim": 2, "type": "lpball", "matrix": [[1, 0], [0, 1]], "p": 2.0 }"#,
        )
        .unwrap();
        assert_eq!(ball.kind(), "lpball");
    }

    #[test]
    fn rejects_bad_specs() {
        // Degenerate functionals.
        assert!(ConvexBody::from_json(
            r#"{ "dim": 2, "type": "hpolytope", "halfspaces": [[1, 0], [2, 0]] }"#
        )
        .is_err());
        // Wrong matrix shape.
        assert!(ConvexBody::from_json(
            r#"{ "dim": 3, "type": "ellipsoid", "matrix": [[1, 0], [0, 1]] }"#
        )
        .is_err());
        // Unknown tag.
        assert!(ConvexBody::from_json(r#"{ "dim": 2, "type": "zonotope", "generators": [] }"#).is_err());
        // Exponent out of range.
        assert!(ConvexBody::from_json(
            r#"{ "dim": 2, "type": "powersum", "halfspaces": [[1, 0], [0, 1]], "s": 1.0 }"#
        )
        .is_err());
    }

    #[test]
    fn polar_wrapper_refuses_to_serialize() {
        let hexagon = ConvexBody::regular_polygon(6).unwrap().smoothed(8.0).unwrap();
        let polar = hexagon.polar();
        assert!(matches!(polar.to_spec(), Err(Error::NotSerializable)));
    }
}

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

/// 3×3 projective transform with 8 degrees of freedom.
///
/// Stored with the bottom-right entry equal to 1 when that entry is nonzero,
/// otherwise scaled to unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

const DEN_EPS: f64 = 1e-12;

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let m = if m[(2, 2)].abs() > DEN_EPS {
            m / m[(2, 2)]
        } else {
            let n = m.norm();
            if n == 0.0 {
                return Err(GeometryError::Singular(0.0));
            }
            m / n
        };
        let det = m.determinant();
        if !(det.abs() > DEN_EPS) {
            return Err(GeometryError::Singular(det));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut m = Matrix3::identity();
        m[(0, 2)] = tx;
        m[(1, 2)] = ty;
        Self { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is a construction invariant.
        let inv = self.m.try_inverse().expect("homography is invertible");
        // The inverse of an invertible matrix is invertible; only rescale.
        let m = if inv[(2, 2)].abs() > DEN_EPS {
            inv / inv[(2, 2)]
        } else {
            inv / inv.norm()
        };
        Homography { m }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography, GeometryError> {
        Homography::new(self.m * other.m)
    }

    /// Projective image of `p`.
    pub fn warp_point(&self, p: (f64, f64)) -> Result<(f64, f64), GeometryError> {
        let m = &self.m;
        let den = m[(2, 0)] * p.0 + m[(2, 1)] * p.1 + m[(2, 2)];
        if den.abs() <= DEN_EPS {
            return Err(GeometryError::PointAtInfinity);
        }
        Ok((
            (m[(0, 0)] * p.0 + m[(0, 1)] * p.1 + m[(0, 2)]) / den,
            (m[(1, 0)] * p.0 + m[(1, 1)] * p.1 + m[(1, 2)]) / den,
        ))
    }

    /// Like [`Homography::warp_point`] but returns `None` at infinity.
    #[inline]
    pub(crate) fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let v = self.m * Vector3::new(x, y, 1.0);
        (v.z.abs() > DEN_EPS).then(|| (v.x / v.z, v.y / v.z))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.m - other.m).amax()
    }
}

/// Mean displacement of the four frame corners `(0,0)`, `(w-1,0)`,
/// `(w-1,h-1)`, `(0,h-1)` between two homographies.
pub fn corner_transfer_error(
    estimate: &Homography,
    truth: &Homography,
    height: usize,
    width: usize,
) -> f64 {
    let (w, h) = ((width - 1) as f64, (height - 1) as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    let mut total = 0.0;
    for c in corners {
        match (estimate.apply(c.0, c.1), truth.apply(c.0, c.1)) {
            (Some(a), Some(b)) => total += (a.0 - b.0).hypot(a.1 - b.1),
            _ => return f64::INFINITY,
        }
    }
    total / 4.0
}

/// Nine whitespace-separated decimals, row-major.
pub fn write_homography(h: &Homography, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    std::fs::write(path, format_homography(h))?;
    Ok(())
}

pub fn format_homography(h: &Homography) -> String {
    let mut s = String::new();
    for r in 0..3 {
        let row: Vec<String> = (0..3).map(|c| h.m[(r, c)].to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_homography(text: &str) -> Result<Homography, GeometryError> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| GeometryError::Parse(format!("{t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != 9 {
        return Err(GeometryError::Parse(format!(
            "expected 9 values, found {}",
            vals.len()
        )));
    }
    Homography::new(Matrix3::from_row_slice(&vals))
}

pub fn read_homography(path: impl AsRef<Path>) -> Result<Homography, GeometryError> {
    parse_homography(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn warp_point_examples() {
        let id = Homography::identity();
        assert_eq!(id.warp_point((5.0, 7.0)).unwrap(), (5.0, 7.0));
        let s = Homography::from_rows([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(s.warp_point((1.0, 1.0)).unwrap(), (2.0, 2.0));
        let p = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(p.warp_point((1.0, 0.0)).unwrap(), (0.5, 0.0));
        assert!(matches!(
            p.warp_point((-1.0, 0.0)),
            Err(GeometryError::PointAtInfinity)
        ));
    }

    #[test]
    fn normalization_rules() {
        let h = Homography::from_rows([[2.0, 0.0, 4.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(
            h.to_rows(),
            [[1.0, 0.0, 2.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        );
        let z = Homography::from_rows([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(z.is_err());
        let f = Homography::from_rows([[0.0, 3.0, 1.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]]).unwrap();
        assert!((f.matrix().norm() - 1.0).abs() < 1e-12);
        assert!(
            Homography::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]).is_err()
        );
        assert!(
            Homography::from_rows([[f64::NAN, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
                .is_err()
        );
    }

    #[test]
    fn file_round_trip_renormalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        std::fs::write(&path, "2 0 6\n0 2 -4\n0 0 2\n").unwrap();
        let h = read_homography(&path).unwrap();
        assert_eq!(h, Homography::translation(3.0, -2.0));
        let h2 =
            Homography::from_rows([[1.01, 0.02, 3.3], [-0.01, 0.98, -1.5], [1e-4, -2e-5, 1.0]])
                .unwrap();
        write_homography(&h2, &path).unwrap();
        assert_eq!(read_homography(&path).unwrap(), h2);
        std::fs::write(&path, "1 2 3").unwrap();
        assert!(matches!(
            read_homography(&path),
            Err(GeometryError::Parse(_))
        ));
    }

    #[test]
    fn corner_error_of_translation() {
        let a = Homography::identity();
        let b = Homography::translation(3.0, 4.0);
        assert!((corner_transfer_error(&a, &b, 10, 10) - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn inverse_round_trip(
            a in -0.2f64..0.2, b in -0.2f64..0.2, c in -20.0f64..20.0,
            d in -0.2f64..0.2, e in -0.2f64..0.2, f in -20.0f64..20.0,
            g in -1e-3f64..1e-3, k in -1e-3f64..1e-3,
            px in -100.0f64..100.0, py in -100.0f64..100.0,
        ) {
            let h = Homography::from_rows([[1.0 + a, b, c], [d, 1.0 + e, f], [g, k, 1.0]]).unwrap();
            let inv = h.inverse();
            if let Ok(q) = inv.warp_point((px, py)) {
                if let Ok(back) = h.warp_point(q) {
                    prop_assert!((back.0 - px).abs() < 1e-9 && (back.1 - py).abs() < 1e-9);
                }
            }
        }
    }
}

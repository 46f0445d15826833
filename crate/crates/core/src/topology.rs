//! Lattice topological charge from triangulated solid angles.
//!
//! Each counter-clockwise triangle `(i, j, k)` contributes half of its
//! signed spherical solid angle,
//!
//! ```text
//! Ω/2 = atan2( n_i·(n_j × n_k), 1 + n_i·n_j + n_i·n_k + n_j·n_k )
//! ```
//!
//! and the charge is `Σ (Ω/2) / 2π`. With unit vectors this is the
//! topological index `C`; with `n = 2<S>` (shrunk by quantum fluctuations)
//! the same sum gives the winding parameter `Q`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{SiteRef, Vec3};

/// Raw spin expectation values `<S_i>`, quantum sites first in lattice
/// order, then the classical ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTexture {
    pub quantum: Vec<Vec3>,
    pub classical: Vec<Vec3>,
}

impl SpinTexture {
    pub fn get(&self, site: SiteRef) -> Vec3 {
        match site {
            SiteRef::Quantum(i) => self.quantum[i],
            SiteRef::Classical(i) => self.classical[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `n_i = 2 <S_i>` (ħ = 1).
    Winding,
    /// `n_i = <S_i> / |<S_i>|`.
    Index,
}

pub const DEFAULT_MOMENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinField {
    pub quantum: Vec<Vec3>,
    pub classical: Vec<Vec3>,
    pub mode: Normalization,
}

fn norm(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl SpinField {
    pub fn winding(texture: &SpinTexture) -> Self {
        let scale = |v: &Vec3| v.map(|x| 2.0 * x);
        SpinField {
            quantum: texture.quantum.iter().map(scale).collect(),
            classical: texture.classical.iter().map(scale).collect(),
            mode: Normalization::Winding,
        }
    }

    /// Unit-normalized field; fails on the first site whose moment is below
    /// `floor`.
    pub fn index(texture: &SpinTexture, floor: f64) -> Result<Self> {
        let unit = |site: SiteRef, v: &Vec3| {
            let n = norm(*v);
            if n <= floor || !n.is_finite() {
                Err(Error::VanishingMoment { site, norm: n, floor })
            } else {
                Ok(v.map(|x| x / n))
            }
        };
        let quantum = texture
            .quantum
            .iter()
            .enumerate()
            .map(|(i, v)| unit(SiteRef::Quantum(i), v))
            .collect::<Result<Vec<_>>>()?;
        let classical = texture
            .classical
            .iter()
            .enumerate()
            .map(|(i, v)| unit(SiteRef::Classical(i), v))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpinField {
            quantum,
            classical,
            mode: Normalization::Index,
        })
    }

    pub fn get(&self, site: SiteRef) -> Vec3 {
        match site {
            SiteRef::Quantum(i) => self.quantum[i],
            SiteRef::Classical(i) => self.classical[i],
        }
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> SpinField {
        SpinField {
            quantum: self.quantum.iter().map(|v| f(*v)).collect(),
            classical: self.classical.iter().map(|v| f(*v)).collect(),
            mode: self.mode,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

const DEGENERACY_EPS: f64 = 1e-12;

/// Half the signed solid angle of the spherical triangle `(ni, nj, nk)`.
pub fn half_solid_angle(ni: Vec3, nj: Vec3, nk: Vec3) -> Option<f64> {
    let num = dot(ni, cross(nj, nk));
    let den = 1.0 + dot(ni, nj) + dot(ni, nk) + dot(nj, nk);
    if num.abs() < DEGENERACY_EPS && den.abs() < DEGENERACY_EPS {
        return None;
    }
    Some(num.atan2(den))
}

fn site_label(s: SiteRef) -> usize {
    match s {
        SiteRef::Quantum(i) | SiteRef::Classical(i) => i,
    }
}

/// `(1/2π) Σ Ω/2` over the triangulation, independent of normalization.
pub fn triangulated_charge(field: &SpinField, triangulation: &[[SiteRef; 3]]) -> Result<f64> {
    let mut total = CompensatedSum::default();
    for &[a, b, c] in triangulation {
        let half = half_solid_angle(field.get(a), field.get(b), field.get(c)).ok_or(Error::DegenerateTriangle {
            i: site_label(a),
            j: site_label(b),
            k: site_label(c),
        })?;
        total.add(half);
    }
    Ok(total.value() / (2.0 * PI))
}

/// Charge value together with its nearest integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologicalCharge {
    pub value: f64,
    pub rounded: i64,
}

impl TopologicalCharge {
    pub const REPORTING_TOL: f64 = 0.1;

    pub fn new(value: f64) -> Self {
        TopologicalCharge {
            value,
            rounded: value.round() as i64,
        }
    }

    pub fn is_quantized(&self) -> bool {
        (self.value - self.rounded as f64).abs() <= Self::REPORTING_TOL
    }
}

pub fn topological_index(field: &SpinField, triangulation: &[[SiteRef; 3]]) -> Result<TopologicalCharge> {
    if field.mode != Normalization::Index {
        return Err(Error::FieldMode("topological index needs a unit-normalized field"));
    }
    triangulated_charge(field, triangulation).map(TopologicalCharge::new)
}

pub fn winding_parameter(field: &SpinField, triangulation: &[[SiteRef; 3]]) -> Result<f64> {
    if field.mode != Normalization::Winding {
        return Err(Error::FieldMode("winding parameter needs the 2<S> field"));
    }
    triangulated_charge(field, triangulation)
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: Vec3 = [1.0, 0.0, 0.0];
    const Y: Vec3 = [0.0, 1.0, 0.0];
    const Z: Vec3 = [0.0, 0.0, 1.0];

    #[test]
    fn point_triangle_is_zero() {
        assert_eq!(half_solid_angle(Z, Z, Z), Some(0.0));
    }

    #[test]
    fn octant_is_quarter_pi() {
        let h = half_solid_angle(X, Y, Z).unwrap();
        assert!((h - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_arguments_flips_sign() {
        let a = [0.3, -0.2, 0.93];
        let b = [-0.5, 0.1, 0.86];
        let c = [0.1, 0.7, 0.7];
        let h = half_solid_angle(a, b, c).unwrap();
        assert!((half_solid_angle(b, a, c).unwrap() + h).abs() < 1e-15);
        assert!((half_solid_angle(a, c, b).unwrap() + h).abs() < 1e-15);
        assert!((half_solid_angle(c, b, a).unwrap() + h).abs() < 1e-15);
    }

    #[test]
    fn antipodal_triangle_is_degenerate() {
        assert_eq!(half_solid_angle(X, [-1.0, 0.0, 0.0], Y), None);
    }

    #[test]
    fn compensated_sum_is_order_insensitive() {
        let xs = [1e16, 1.0, -1e16, 3.0];
        let s: CompensatedSum = xs.iter().copied().collect();
        assert_eq!(s.value(), 4.0);
    }

    #[test]
    fn index_mode_rejects_vanishing_moment() {
        let tex = SpinTexture {
            quantum: vec![[0.0, 0.0, 0.5], [1e-9, 0.0, 0.0]],
            classical: vec![],
        };
        match SpinField::index(&tex, DEFAULT_MOMENT_FLOOR) {
            Err(Error::VanishingMoment { site, .. }) => assert_eq!(site, SiteRef::Quantum(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn modes_are_checked() {
        let tex = SpinTexture {
            quantum: vec![[0.0, 0.0, 0.5]],
            classical: vec![],
        };
        let w = SpinField::winding(&tex);
        assert!(topological_index(&w, &[]).is_err());
        let i = SpinField::index(&tex, 1e-6).unwrap();
        assert!(winding_parameter(&i, &[]).is_err());
        assert_eq!(w.quantum[0], [0.0, 0.0, 1.0]);
    }
}

use std::f64::consts::PI;

use proptest::prelude::*;
use qsky_core::*;

fn lattice() -> Lattice {
    build_lattice(LatticeSpec::with_boundary(3)).unwrap()
}

/// Core down at the centre, +z from distance 2 outward, in-plane component
/// along the azimuth.
fn covering_texture(lat: &Lattice, radius: f64) -> SpinTexture {
    let quantum = lat
        .quantum_sites
        .iter()
        .map(|&[x, y]| {
            let (dx, dy) = (x as f64 - 1.0, y as f64 - 1.0);
            let r = dx.hypot(dy);
            let theta = PI * (1.0 - (r / radius).min(1.0));
            let phi = dy.atan2(dx);
            [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
        })
        .collect();
    let classical = lat.classical_sites.iter().map(|c| c.direction).collect();
    SpinTexture { quantum, classical }
}

fn charge(lat: &Lattice, texture: &SpinTexture) -> f64 {
    let field = SpinField::index(texture, DEFAULT_MOMENT_FLOOR).unwrap();
    topological_index(&field, &lat.triangulation).unwrap().value
}

fn rotation(axis: [f64; 3], angle: f64) -> impl Fn(Vec3) -> Vec3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    move |v: Vec3| {
        let kxv = [
            k[1] * v[2] - k[2] * v[1],
            k[2] * v[0] - k[0] * v[2],
            k[0] * v[1] - k[1] * v[0],
        ];
        let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
        [0, 1, 2].map(|i| v[i] * c + kxv[i] * s + k[i] * kv * (1.0 - c))
    }
}

#[test]
fn covering_texture_has_unit_negative_charge() {
    let lat = lattice();
    let c = charge(&lat, &covering_texture(&lat, 2.0));
    assert!((c + 1.0).abs() < 1e-6, "C = {c}");
}

#[test]
fn uniform_up_texture_is_trivial() {
    let lat = lattice();
    let texture = SpinTexture {
        quantum: vec![[0.0, 0.0, 1.0]; 9],
        classical: vec![[0.0, 0.0, 0.5]; lat.classical_sites.len()],
    };
    assert!(charge(&lat, &texture).abs() < 1e-12);
}

#[test]
fn mirrored_texture_flips_the_charge() {
    let lat = lattice();
    let mut texture = covering_texture(&lat, 2.0);
    for v in texture.quantum.iter_mut() {
        v[1] = -v[1];
    }
    let c = charge(&lat, &texture);
    assert!((c - 1.0).abs() < 1e-6, "C = {c}");
}

#[test]
fn winding_of_full_moments_equals_index() {
    let lat = lattice();
    let texture = covering_texture(&lat, 2.0);
    let half = SpinTexture {
        quantum: texture.quantum.iter().map(|v| v.map(|x| 0.5 * x)).collect(),
        classical: texture.classical.iter().map(|v| v.map(|x| 0.5 * x)).collect(),
    };
    let q = winding_parameter(&SpinField::winding(&half), &lat.triangulation).unwrap();
    assert!((q - charge(&lat, &texture)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn charge_is_invariant_under_global_rotation(
        ax in prop::array::uniform3(-1.0f64..1.0),
        angle in -PI..PI,
        radius in 1.5f64..2.5,
    ) {
        prop_assume!(ax.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let lat = lattice();
        let texture = covering_texture(&lat, radius);
        let base = charge(&lat, &texture);
        let rot = rotation(ax, angle);
        let field = SpinField::index(&texture, DEFAULT_MOMENT_FLOOR).unwrap().map(rot);
        let rotated = topological_index(&field, &lat.triangulation).unwrap().value;
        prop_assert!((rotated - base).abs() < 1e-9, "{rotated} vs {base}");
    }

    #[test]
    fn small_perturbations_keep_the_charge(
        noise in prop::collection::vec(prop::array::uniform3(-0.15f64..0.15), 9),
    ) {
        let lat = lattice();
        let mut texture = covering_texture(&lat, 2.0);
        for (v, d) in texture.quantum.iter_mut().zip(&noise) {
            for a in 0..3 {
                v[a] += d[a];
            }
        }
        let c = charge(&lat, &texture);
        prop_assert!((c + 1.0).abs() < 1e-9, "C = {c}");
    }

    #[test]
    fn sum_does_not_depend_on_triangle_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let lat = lattice();
        let field = SpinField::index(&covering_texture(&lat, 1.8), DEFAULT_MOMENT_FLOOR).unwrap();
        let mut tris = lat.triangulation.clone();
        tris.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = triangulated_charge(&field, &lat.triangulation).unwrap();
        let b = triangulated_charge(&field, &tris).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn half_angle_is_cyclic_and_odd(
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        c in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let unit = |v: Vec3| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.map(|x| x / n)
        };
        prop_assume!([a, b, c].iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2));
        let (a, b, c) = (unit(a), unit(b), unit(c));
        let Some(abc) = half_solid_angle(a, b, c) else { return Ok(()) };
        prop_assume!(abc.abs() < PI - 1e-6);
        let bca = half_solid_angle(b, c, a).unwrap();
        let acb = half_solid_angle(a, c, b).unwrap();
        prop_assert!((abc - bca).abs() < 1e-12);
        prop_assert!((abc + acb).abs() < 1e-12);
    }
}

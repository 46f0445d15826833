//! Square-lattice geometry: quantum region, classical ferromagnetic ring,
//! nearest-neighbour bonds and the non-overlapping triangulation used by the
//! topological charge.
//!
//! Coordinates are integer `(x, y)` pairs. The quantum region occupies
//! `0..n` in both directions and is indexed row-major (`y * n + x`). When a
//! classical boundary is present it occupies the ring at `x` or `y` in
//! `{-1, n}`.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Length of every quantum spin (ħ = 1).
pub const SPIN_LENGTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    None,
    ClassicalFerromagneticUp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub n: usize,
    pub boundary: Boundary,
    /// Length of the fixed classical boundary vectors along +z.
    pub classical_spin_length: f64,
}

impl LatticeSpec {
    pub fn new(n: usize, boundary: Boundary) -> Self {
        LatticeSpec {
            n,
            boundary,
            classical_spin_length: SPIN_LENGTH,
        }
    }

    pub fn with_boundary(n: usize) -> Self {
        Self::new(n, Boundary::ClassicalFerromagneticUp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteRef {
    Quantum(usize),
    Classical(usize),
}

impl SiteRef {
    pub fn is_quantum(self) -> bool {
        matches!(self, SiteRef::Quantum(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondDirection {
    PlusX,
    PlusY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondKind {
    QuantumQuantum,
    QuantumClassical,
}

/// Directed nearest-neighbour bond; `e_ij` points from `from` to `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub from: SiteRef,
    pub to: SiteRef,
    pub direction: BondDirection,
    pub kind: BondKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSite {
    pub position: [i32; 2],
    pub direction: Vec3,
    pub length: f64,
}

impl ClassicalSite {
    pub fn vector(&self) -> Vec3 {
        [
            self.direction[0] * self.length,
            self.direction[1] * self.length,
            self.direction[2] * self.length,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    pub quantum_sites: Vec<[i32; 2]>,
    pub classical_sites: Vec<ClassicalSite>,
    pub bonds: Vec<Bond>,
    /// Counter-clockwise site triples.
    pub triangulation: Vec<[SiteRef; 3]>,
    // grid lookup over the bounding box, offset by `origin`
    grid: Vec<Option<SiteRef>>,
    origin: i32,
    width: usize,
}

/// `e_ij × ẑ` for a bond direction.
pub fn dmi_axis(direction: BondDirection) -> Vec3 {
    match direction {
        BondDirection::PlusX => [0.0, -1.0, 0.0],
        BondDirection::PlusY => [1.0, 0.0, 0.0],
    }
}

pub fn build_lattice(spec: LatticeSpec) -> Result<Lattice> {
    if spec.n == 0 {
        return Err(Error::InvalidLattice("n must be at least 1".into()));
    }
    if !(spec.classical_spin_length.is_finite() && spec.classical_spin_length >= 0.0) {
        return Err(Error::InvalidLattice(format!(
            "classical spin length must be finite and non-negative, got {}",
            spec.classical_spin_length
        )));
    }
    let n = spec.n as i32;
    let (origin, width) = match spec.boundary {
        Boundary::None => (0, spec.n),
        Boundary::ClassicalFerromagneticUp => (-1, spec.n + 2),
    };

    let mut grid = vec![None; width * width];
    let mut quantum_sites = Vec::with_capacity(spec.n * spec.n);
    let mut classical_sites = Vec::new();
    for y in origin..origin + width as i32 {
        for x in origin..origin + width as i32 {
            let slot = (y - origin) as usize * width + (x - origin) as usize;
            let inside = (0..n).contains(&x) && (0..n).contains(&y);
            if inside {
                // row-major within the quantum block
                let idx = (y * n + x) as usize;
                grid[slot] = Some(SiteRef::Quantum(idx));
            } else {
                grid[slot] = Some(SiteRef::Classical(classical_sites.len()));
                classical_sites.push(ClassicalSite {
                    position: [x, y],
                    direction: [0.0, 0.0, 1.0],
                    length: spec.classical_spin_length,
                });
            }
        }
    }
    for y in 0..n {
        for x in 0..n {
            quantum_sites.push([x, y]);
        }
    }

    let mut lattice = Lattice {
        spec,
        quantum_sites,
        classical_sites,
        bonds: Vec::new(),
        triangulation: Vec::new(),
        grid,
        origin,
        width,
    };

    let lo = origin;
    let hi = origin + width as i32;
    for y in lo..hi {
        for x in lo..hi {
            let here = lattice.site_at(x, y).expect("inside bounding box");
            for (dx, dy, direction) in [(1, 0, BondDirection::PlusX), (0, 1, BondDirection::PlusY)] {
                let Some(there) = lattice.site_at(x + dx, y + dy) else {
                    continue;
                };
                let kind = match (here.is_quantum(), there.is_quantum()) {
                    (true, true) => BondKind::QuantumQuantum,
                    (false, false) => continue,
                    _ => BondKind::QuantumClassical,
                };
                lattice.bonds.push(Bond {
                    from: here,
                    to: there,
                    direction,
                    kind,
                });
            }
        }
    }

    for y in lo..hi - 1 {
        for x in lo..hi - 1 {
            let a = lattice.site_at(x, y).unwrap();
            let b = lattice.site_at(x + 1, y).unwrap();
            let c = lattice.site_at(x + 1, y + 1).unwrap();
            let d = lattice.site_at(x, y + 1).unwrap();
            lattice.triangulation.push([a, b, c]);
            lattice.triangulation.push([a, c, d]);
        }
    }

    Ok(lattice)
}

impl Lattice {
    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn num_quantum(&self) -> usize {
        self.quantum_sites.len()
    }

    pub fn has_boundary(&self) -> bool {
        self.spec.boundary == Boundary::ClassicalFerromagneticUp
    }

    pub fn site_at(&self, x: i32, y: i32) -> Option<SiteRef> {
        let gx = x - self.origin;
        let gy = y - self.origin;
        if gx < 0 || gy < 0 || gx as usize >= self.width || gy as usize >= self.width {
            return None;
        }
        self.grid[gy as usize * self.width + gx as usize]
    }

    pub fn position(&self, site: SiteRef) -> [i32; 2] {
        match site {
            SiteRef::Quantum(i) => self.quantum_sites[i],
            SiteRef::Classical(i) => self.classical_sites[i].position,
        }
    }

    pub fn bonds_of_kind(&self, kind: BondKind) -> impl Iterator<Item = &Bond> {
        self.bonds.iter().filter(move |b| b.kind == kind)
    }

    /// Number of classical nearest neighbours of each quantum site.
    pub fn classical_neighbour_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_quantum()];
        for bond in self.bonds_of_kind(BondKind::QuantumClassical) {
            for end in [bond.from, bond.to] {
                if let SiteRef::Quantum(i) = end {
                    counts[i] += 1;
                }
            }
        }
        counts
    }

    /// Copy of the lattice with quantum site `i` renamed to `perm[i]`.
    ///
    /// Geometry is untouched; only the labels (and hence the basis-bit
    /// assignment of the Hamiltonian) change.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Lattice> {
        let count = self.num_quantum();
        let mut seen = vec![false; count];
        if perm.len() != count
            || perm
                .iter()
                .any(|&p| p >= count || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidLattice("relabeling is not a permutation".into()));
        }
        let map = |s: SiteRef| match s {
            SiteRef::Quantum(i) => SiteRef::Quantum(perm[i]),
            other => other,
        };
        let mut out = self.clone();
        for (i, &p) in perm.iter().enumerate() {
            out.quantum_sites[p] = self.quantum_sites[i];
        }
        for slot in out.grid.iter_mut() {
            *slot = slot.map(map);
        }
        for bond in out.bonds.iter_mut() {
            bond.from = map(bond.from);
            bond.to = map(bond.to);
        }
        for tri in out.triangulation.iter_mut() {
            *tri = tri.map(map);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn count(lat: &Lattice, kind: BondKind) -> usize {
        lat.bonds_of_kind(kind).count()
    }

    #[test]
    fn rejects_empty_lattice() {
        assert!(build_lattice(LatticeSpec::with_boundary(0)).is_err());
    }

    #[test]
    fn site_counts_match_examples() {
        let l1 = build_lattice(LatticeSpec::with_boundary(1)).unwrap();
        assert_eq!(
            (l1.num_quantum(), l1.classical_sites.len(), l1.triangulation.len()),
            (1, 8, 8)
        );

        let l3 = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        assert_eq!(
            (l3.num_quantum(), l3.classical_sites.len(), l3.triangulation.len()),
            (9, 16, 32)
        );

        let l2 = build_lattice(LatticeSpec::new(2, Boundary::None)).unwrap();
        assert_eq!(l2.num_quantum(), 4);
        assert_eq!(count(&l2, BondKind::QuantumQuantum), 4);
        assert_eq!(count(&l2, BondKind::QuantumClassical), 0);
        assert_eq!(l2.triangulation.len(), 2);
    }

    #[test]
    fn bond_counts_follow_closed_forms() {
        for n in 1..=5 {
            let lat = build_lattice(LatticeSpec::with_boundary(n)).unwrap();
            assert_eq!(count(&lat, BondKind::QuantumQuantum), 2 * n * (n - 1));
            assert_eq!(count(&lat, BondKind::QuantumClassical), 4 * n);
            assert_eq!(lat.classical_sites.len(), (n + 2) * (n + 2) - n * n);
            assert_eq!(lat.triangulation.len(), 2 * (n + 1) * (n + 1));
        }
    }

    #[test]
    fn bonds_are_unique_nearest_neighbours() {
        let lat = build_lattice(LatticeSpec::with_boundary(4)).unwrap();
        let mut pairs = HashSet::new();
        for b in &lat.bonds {
            let [x0, y0] = lat.position(b.from);
            let [x1, y1] = lat.position(b.to);
            let expected = match b.direction {
                BondDirection::PlusX => [x0 + 1, y0],
                BondDirection::PlusY => [x0, y0 + 1],
            };
            assert_eq!([x1, y1], expected);
            let key = if b.from < b.to { (b.from, b.to) } else { (b.to, b.from) };
            assert!(pairs.insert(key), "duplicate bond {key:?}");
        }
    }

    #[test]
    fn triangles_are_counter_clockwise() {
        let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        for tri in &lat.triangulation {
            let [a, b, c] = tri.map(|s| lat.position(s));
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            assert_eq!(cross, 1, "triangle {tri:?} is not CCW with unit area");
        }
    }

    #[test]
    fn triangles_tile_the_grid_without_overlap() {
        // every unit square is split exactly once, so total doubled area is 2(n+1)^2
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        let mut squares = HashSet::new();
        for tri in &lat.triangulation {
            let ps = tri.map(|s| lat.position(s));
            let minx = ps.iter().map(|p| p[0]).min().unwrap();
            let miny = ps.iter().map(|p| p[1]).min().unwrap();
            let upper = ps.contains(&[minx, miny + 1]);
            assert!(squares.insert((minx, miny, upper)));
        }
        assert_eq!(squares.len(), 2 * 9);
    }

    #[test]
    fn dmi_axis_is_bond_cross_z() {
        assert_eq!(dmi_axis(BondDirection::PlusX), [0.0, -1.0, 0.0]);
        assert_eq!(dmi_axis(BondDirection::PlusY), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn classical_neighbour_counts_n3() {
        let lat = build_lattice(LatticeSpec::with_boundary(3)).unwrap();
        let counts = lat.classical_neighbour_counts();
        // corners 2, edge midpoints 1, centre 0
        assert_eq!(counts, vec![2, 1, 2, 1, 0, 1, 2, 1, 2]);
    }

    #[test]
    fn relabeling_rejects_non_permutations() {
        let lat = build_lattice(LatticeSpec::with_boundary(2)).unwrap();
        assert!(lat.relabeled(&[0, 0, 1, 2]).is_err());
        assert!(lat.relabeled(&[0, 1, 2]).is_err());
        let r = lat.relabeled(&[3, 2, 1, 0]).unwrap();
        assert_eq!(r.quantum_sites[3], lat.quantum_sites[0]);
        assert_eq!(r.site_at(0, 0), Some(SiteRef::Quantum(3)));
    }
}

//! Square-lattice geometry with spins on edges.
//!
//! Edges are indexed row-major over unit cells, the horizontal edge of a cell
//! before its vertical edge: cell `(x, y)` owns the horizontal edge from vertex
//! `(x, y)` to `(x + 1, y)` and the vertical edge from `(x, y)` to `(x, y + 1)`.
//! On a torus this gives `id = 2 * (y * lx + x) + kind`. The finite cylinder
//! (open in x, periodic in y) drops the horizontal edges that would wrap
//! around x and renumbers the remaining edges contiguously in the same order.
//!
//! Supports and regions are `u64` bit masks over edge ids, so a geometry holds
//! at most 64 edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of edges a geometry may carry (one `u64` mask).
pub const MAX_EDGES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Periodic in both directions.
    Torus,
    /// Periodic in y, open (smooth edges) in x.
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Horizontal,
    Vertical,
}

/// Pauli type of a Wilson loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopKind {
    Z,
    X,
}

/// A non-contractible loop operator: the product of one Pauli type over
/// `edges`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopSpec {
    pub kind: LoopKind,
    pub edges: Vec<usize>,
}

impl LoopSpec {
    pub fn mask(&self) -> u64 {
        mask_of(&self.edges)
    }
}

/// A subset of edges forming the `A` side of a bipartition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub label: String,
    mask: u64,
    n_edges: usize,
}

impl Region {
    /// Builds a region from an edge mask. The mask must be non-empty and must
    /// not cover every edge.
    pub fn new(label: impl Into<String>, mask: u64, n_edges: usize) -> Result<Self> {
        let full = full_mask(n_edges);
        if mask & !full != 0 {
            return Err(Error::InvalidRegion(format!(
                "mask {mask:#x} references edges beyond {n_edges}"
            )));
        }
        if mask == 0 {
            return Err(Error::InvalidRegion("region is empty".into()));
        }
        if mask == full {
            return Err(Error::InvalidRegion("region covers every edge".into()));
        }
        Ok(Region {
            label: label.into(),
            mask,
            n_edges,
        })
    }

    pub fn from_edges(label: impl Into<String>, edges: &[usize], n_edges: usize) -> Result<Self> {
        if let Some(&e) = edges.iter().find(|&&e| e >= n_edges) {
            return Err(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: n_edges,
            });
        }
        Region::new(label, mask_of(edges), n_edges)
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn n_edges_total(&self) -> usize {
        self.n_edges
    }

    /// Edge ids inside the region, ascending.
    pub fn edges(&self) -> Vec<usize> {
        edges_of(self.mask)
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, edge: usize) -> bool {
        edge < 64 && self.mask >> edge & 1 == 1
    }

    /// The `B` side.
    pub fn complement(&self) -> Region {
        Region {
            label: format!("{}^c", self.label),
            mask: full_mask(self.n_edges) & !self.mask,
            n_edges: self.n_edges,
        }
    }
}

/// Immutable lattice geometry: edge numbering, star and plaquette supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    lx: usize,
    ly: usize,
    boundary: Boundary,
    /// Indexed by `2 * (y * lx + x) + kind`; `None` for dropped edges.
    edge_ids: Vec<Option<usize>>,
    n_edges: usize,
    stars: Vec<u64>,
    plaquettes: Vec<u64>,
    /// Cell coordinates of each plaquette.
    plaquette_cells: Vec<(usize, usize)>,
}

impl LatticeGeometry {
    /// Periodic `lx` by `ly` lattice with `2 * lx * ly` edges.
    pub fn torus(lx: usize, ly: usize) -> Result<Self> {
        Self::build(lx, ly, Boundary::Torus)
    }

    /// Cylinder periodic in y with open smooth edges in x. Stars on the two
    /// boundary columns have three edges.
    pub fn cylinder(lx: usize, ly: usize) -> Result<Self> {
        Self::build(lx, ly, Boundary::Cylinder)
    }

    pub fn build(lx: usize, ly: usize, boundary: Boundary) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidGeometry(format!(
                "lattice dimensions must be at least 2, got {lx}x{ly}"
            )));
        }
        let mut edge_ids = vec![None; 2 * lx * ly];
        let mut n_edges = 0;
        for y in 0..ly {
            for x in 0..lx {
                for kind in 0..2 {
                    let wraps = kind == 0 && x == lx - 1 && boundary == Boundary::Cylinder;
                    if !wraps {
                        edge_ids[2 * (y * lx + x) + kind] = Some(n_edges);
                        n_edges += 1;
                    }
                }
            }
        }
        if n_edges > MAX_EDGES {
            return Err(Error::InvalidGeometry(format!(
                "{n_edges} edges exceed the {MAX_EDGES}-edge mask capacity"
            )));
        }

        let mut geom = LatticeGeometry {
            lx,
            ly,
            boundary,
            edge_ids,
            n_edges,
            stars: Vec::new(),
            plaquettes: Vec::new(),
            plaquette_cells: Vec::new(),
        };

        let mut stars = Vec::with_capacity(lx * ly);
        for y in 0..ly {
            for x in 0..lx {
                let xl = (x + lx - 1) % lx;
                let yd = (y + ly - 1) % ly;
                let mut m = 0u64;
                for e in [
                    geom.edge(x, y, EdgeKind::Horizontal),
                    geom.edge(xl, y, EdgeKind::Horizontal),
                    geom.edge(x, y, EdgeKind::Vertical),
                    geom.edge(x, yd, EdgeKind::Vertical),
                ]
                .into_iter()
                .flatten()
                {
                    m |= 1 << e;
                }
                stars.push(m);
            }
        }

        let mut plaquettes = Vec::with_capacity(lx * ly);
        let mut cells = Vec::with_capacity(lx * ly);
        for y in 0..ly {
            for x in 0..lx {
                let xr = (x + 1) % lx;
                let yu = (y + 1) % ly;
                let es = [
                    geom.edge(x, y, EdgeKind::Horizontal),
                    geom.edge(x, yu, EdgeKind::Horizontal),
                    geom.edge(x, y, EdgeKind::Vertical),
                    geom.edge(xr, y, EdgeKind::Vertical),
                ];
                if es.iter().any(Option::is_none) || (boundary == Boundary::Cylinder && x == lx - 1)
                {
                    continue;
                }
                plaquettes.push(es.into_iter().flatten().fold(0u64, |m, e| m | 1 << e));
                cells.push((x, y));
            }
        }
        geom.stars = stars;
        geom.plaquettes = plaquettes;
        geom.plaquette_cells = cells;
        Ok(geom)
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_stars(&self) -> usize {
        self.stars.len()
    }

    pub fn n_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    /// Edge id owned by cell `(x, y)` (coordinates taken modulo the lattice
    /// size), or `None` where the cylinder drops it.
    pub fn edge(&self, x: usize, y: usize, kind: EdgeKind) -> Option<usize> {
        let (x, y) = (x % self.lx, y % self.ly);
        let k = match kind {
            EdgeKind::Horizontal => 0,
            EdgeKind::Vertical => 1,
        };
        self.edge_ids[2 * (y * self.lx + x) + k]
    }

    /// Index of the star at vertex `(x, y)`.
    pub fn star_at(&self, x: usize, y: usize) -> usize {
        (y % self.ly) * self.lx + x % self.lx
    }

    /// Index of the plaquette of cell `(x, y)`, if the cell carries one.
    pub fn plaquette_at(&self, x: usize, y: usize) -> Option<usize> {
        let cell = (x % self.lx, y % self.ly);
        self.plaquette_cells.iter().position(|&c| c == cell)
    }

    pub fn star_support(&self, s: usize) -> Result<u64> {
        self.stars.get(s).copied().ok_or(Error::IndexOutOfRange {
            what: "star",
            index: s,
            len: self.stars.len(),
        })
    }

    pub fn plaquette_support(&self, p: usize) -> Result<u64> {
        self.plaquettes
            .get(p)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                what: "plaquette",
                index: p,
                len: self.plaquettes.len(),
            })
    }

    pub fn stars(&self) -> &[u64] {
        &self.stars
    }

    pub fn plaquettes(&self) -> &[u64] {
        &self.plaquettes
    }

    /// Horizontal edge ids, ascending.
    pub fn horizontal_edges(&self) -> Vec<usize> {
        (0..self.ly)
            .flat_map(|y| (0..self.lx).map(move |x| (x, y)))
            .filter_map(|(x, y)| self.edge(x, y, EdgeKind::Horizontal))
            .collect()
    }

    /// The four edges around star `s`.
    pub fn region_star(&self, s: usize) -> Result<Region> {
        let m = self.star_support(s)?;
        Region::new(format!("star{s}"), m, self.n_edges)
    }

    /// Union of star `s` and a plaquette `p` having the star's vertex as a
    /// corner. The two supports overlap on the two edges at that vertex.
    pub fn region_star_plaquette(&self, s: usize, p: usize) -> Result<Region> {
        let ms = self.star_support(s)?;
        let mp = self.plaquette_support(p)?;
        if ms & mp == 0 {
            return Err(Error::InvalidRegion(format!(
                "star {s} and plaquette {p} are not adjacent"
            )));
        }
        Region::new(format!("star{s}+plaquette{p}"), ms | mp, self.n_edges)
    }

    /// Star at the origin together with the plaquette of cell `(0, 0)`.
    pub fn default_star_plaquette(&self) -> Result<Region> {
        let p = self
            .plaquette_at(0, 0)
            .ok_or_else(|| Error::InvalidRegion("cell (0, 0) has no plaquette".into()))?;
        self.region_star_plaquette(self.star_at(0, 0), p)
    }

    /// Every edge owned by the first `lx / 2` columns of cells: a straight
    /// column cut.
    pub fn region_half(&self) -> Result<Region> {
        let cols = self.lx / 2;
        let mut m = 0u64;
        for y in 0..self.ly {
            for x in 0..cols {
                for kind in [EdgeKind::Horizontal, EdgeKind::Vertical] {
                    if let Some(e) = self.edge(x, y, kind) {
                        m |= 1 << e;
                    }
                }
            }
        }
        Region::new("half", m, self.n_edges)
    }

    /// `l^z_1`: `σ^z` on the vertical edges of column 0, a cycle around the
    /// periodic direction.
    pub fn loop_z_vertical(&self) -> LoopSpec {
        LoopSpec {
            kind: LoopKind::Z,
            edges: (0..self.ly)
                .filter_map(|y| self.edge(0, y, EdgeKind::Vertical))
                .collect(),
        }
    }

    /// `l^x_2`: `σ^x` on the horizontal edges crossed by a dual cycle around
    /// the periodic direction (edges `h(0, y)`).
    pub fn loop_x_vertical(&self) -> LoopSpec {
        LoopSpec {
            kind: LoopKind::X,
            edges: (0..self.ly)
                .filter_map(|y| self.edge(0, y, EdgeKind::Horizontal))
                .collect(),
        }
    }

    /// `σ^z` on the horizontal edges of row 0 (torus only).
    pub fn loop_z_horizontal(&self) -> Result<LoopSpec> {
        self.require_torus("horizontal z loop")?;
        Ok(LoopSpec {
            kind: LoopKind::Z,
            edges: (0..self.lx)
                .filter_map(|x| self.edge(x, 0, EdgeKind::Horizontal))
                .collect(),
        })
    }

    /// `σ^x` on the vertical edges of row 0: the dual cycle conjugate to
    /// [`loop_z_vertical`](Self::loop_z_vertical).
    pub fn loop_x_horizontal(&self) -> LoopSpec {
        LoopSpec {
            kind: LoopKind::X,
            edges: (0..self.lx)
                .filter_map(|x| self.edge(x, 0, EdgeKind::Vertical))
                .collect(),
        }
    }

    /// The loop pair `(l^z_1, l^x_2)` labelling topological sectors. Both
    /// commute with every star and plaquette and with each other.
    pub fn wilson_loops(&self) -> (LoopSpec, LoopSpec) {
        (self.loop_z_vertical(), self.loop_x_vertical())
    }

    /// The two z-type loops `(l^z_1, l^z_2)`; these commute with every
    /// gauge-invariant perturbation.
    pub fn z_loops(&self) -> Result<(LoopSpec, LoopSpec)> {
        Ok((self.loop_z_vertical(), self.loop_z_horizontal()?))
    }

    pub(crate) fn require_torus(&self, what: &str) -> Result<()> {
        if self.boundary != Boundary::Torus {
            return Err(Error::InvalidGeometry(format!("{what} requires a torus")));
        }
        Ok(())
    }
}

pub fn mask_of(edges: &[usize]) -> u64 {
    edges.iter().fold(0u64, |m, &e| m ^ 1 << e)
}

pub fn edges_of(mask: u64) -> Vec<usize> {
    (0..64).filter(|&e| mask >> e & 1 == 1).collect()
}

pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_all(ms: &[u64]) -> u64 {
        ms.iter().fold(0, |a, &m| a ^ m)
    }

    #[test]
    fn torus_counts() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        assert_eq!((g.n_edges(), g.n_stars(), g.n_plaquettes()), (8, 4, 4));
        let g = LatticeGeometry::torus(3, 2).unwrap();
        assert_eq!((g.n_edges(), g.n_stars(), g.n_plaquettes()), (12, 6, 6));
    }

    #[test]
    fn rejects_small_dimensions() {
        assert!(matches!(
            LatticeGeometry::torus(1, 2),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(LatticeGeometry::torus(2, 1).is_err());
        assert!(LatticeGeometry::torus(6, 6).is_err());
    }

    #[test]
    fn edge_ids_are_row_major_bijection() {
        let g = LatticeGeometry::torus(3, 2).unwrap();
        assert_eq!(g.edge(0, 0, EdgeKind::Horizontal), Some(0));
        assert_eq!(g.edge(0, 0, EdgeKind::Vertical), Some(1));
        assert_eq!(g.edge(2, 1, EdgeKind::Vertical), Some(11));
        let mut seen: Vec<usize> = g.edge_ids.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn supports_have_four_edges_and_each_edge_two_owners() {
        for (lx, ly) in [(2, 2), (3, 2), (3, 3), (4, 3)] {
            let g = LatticeGeometry::torus(lx, ly).unwrap();
            for &m in g.stars().iter().chain(g.plaquettes()) {
                assert_eq!(m.count_ones(), 4);
            }
            for e in 0..g.n_edges() {
                let in_stars = g.stars().iter().filter(|&&m| m >> e & 1 == 1).count();
                let in_plaqs = g.plaquettes().iter().filter(|&&m| m >> e & 1 == 1).count();
                assert_eq!((in_stars, in_plaqs), (2, 2), "edge {e} on {lx}x{ly}");
            }
        }
    }

    #[test]
    fn global_stabilizer_relations() {
        for (lx, ly) in [(2, 2), (3, 2), (4, 2), (3, 3)] {
            let g = LatticeGeometry::torus(lx, ly).unwrap();
            assert_eq!(xor_all(g.stars()), 0);
            assert_eq!(xor_all(g.plaquettes()), 0);
        }
    }

    #[test]
    fn adjacent_star_supports_differ_in_six_edges() {
        let g = LatticeGeometry::torus(3, 3).unwrap();
        let a = g.star_support(g.star_at(0, 0)).unwrap();
        let b = g.star_support(g.star_at(1, 0)).unwrap();
        assert_eq!((a ^ b).count_ones(), 6);
    }

    #[test]
    fn star_and_corner_plaquette_share_two_edges() {
        let g = LatticeGeometry::torus(3, 2).unwrap();
        let s = g.star_support(g.star_at(1, 1)).unwrap();
        let p = g.plaquette_support(g.plaquette_at(1, 1).unwrap()).unwrap();
        assert_eq!((s & p).count_ones(), 2);
        // star and plaquette always overlap on an even number of edges
        for &s in g.stars() {
            for &p in g.plaquettes() {
                assert_eq!((s & p).count_ones() % 2, 0);
            }
        }
    }

    #[test]
    fn region_sizes() {
        let g = LatticeGeometry::torus(3, 2).unwrap();
        assert_eq!(g.region_star(0).unwrap().len(), 4);
        assert_eq!(g.default_star_plaquette().unwrap().len(), 6);
        let g = LatticeGeometry::torus(4, 2).unwrap();
        let half = g.region_half().unwrap();
        assert_eq!(half.len(), 8);
        assert_eq!(half.complement().len(), 8);
    }

    #[test]
    fn non_adjacent_star_plaquette_is_rejected() {
        let g = LatticeGeometry::torus(4, 4).unwrap();
        let far = g.plaquette_at(2, 2).unwrap();
        assert!(matches!(
            g.region_star_plaquette(g.star_at(0, 0), far),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn regions_must_be_proper_subsets() {
        assert!(Region::new("empty", 0, 8).is_err());
        assert!(Region::new("all", 0xff, 8).is_err());
        assert!(Region::new("ok", 0x0f, 8).is_ok());
        assert!(Region::from_edges("bad", &[9], 8).is_err());
    }

    #[test]
    fn index_out_of_range() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        assert!(matches!(
            g.star_support(4),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(g.plaquette_support(9).is_err());
    }

    #[test]
    fn wilson_loop_lengths_and_commutation() {
        let g = LatticeGeometry::torus(2, 2).unwrap();
        assert_eq!(g.loop_z_vertical().edges.len(), 2);
        let g = LatticeGeometry::torus(3, 3).unwrap();
        let (lz, lx) = g.wilson_loops();
        assert_eq!(lz.edges.len(), 3);
        // z loop commutes with stars, x loop with plaquettes
        for &s in g.stars() {
            assert_eq!((s & lz.mask()).count_ones() % 2, 0);
        }
        for &p in g.plaquettes() {
            assert_eq!((p & lx.mask()).count_ones() % 2, 0);
        }
        assert_eq!(lz.mask() & lx.mask(), 0);
        let conj = g.loop_x_horizontal();
        assert_eq!((conj.mask() & lz.mask()).count_ones() % 2, 1);
    }

    #[test]
    fn cylinder_has_three_edge_boundary_stars() {
        let g = LatticeGeometry::cylinder(3, 3).unwrap();
        assert_eq!(g.n_edges(), 2 * 3 * 3 - 3);
        assert_eq!(g.n_plaquettes(), 2 * 3);
        let sizes: Vec<u32> = g.stars().iter().map(|m| m.count_ones()).collect();
        assert_eq!(sizes.iter().filter(|&&c| c == 3).count(), 6);
        assert_eq!(sizes.iter().filter(|&&c| c == 4).count(), 3);
        assert!(g.z_loops().is_err());
        let (lz, lx) = g.wilson_loops();
        for &s in g.stars() {
            assert_eq!((s & lz.mask()).count_ones() % 2, 0);
        }
        for &p in g.plaquettes() {
            assert_eq!((p & lx.mask()).count_ones() % 2, 0);
        }
    }
}

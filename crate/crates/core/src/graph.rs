//! Lattices as undirected, unweighted, connected graphs.
//!
//! A [`Lattice`] precomputes all-pairs hop distances at construction so that
//! every bound can ask for `d(j, k)` or `d(j, R)` in O(1) / O(|R|).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Undirected hopping graph with precomputed hop metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    num_sites: usize,
    /// Unordered edges stored as `(a, b)` with `a < b`, sorted.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    dist: Vec<u32>,
    max_degree: usize,
}

impl Lattice {
    /// Open or periodic chain of `len` sites.
    pub fn chain(len: usize, periodic: bool) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidLattice(format!(
                "chain needs at least 2 sites, got {len}"
            )));
        }
        let mut edges: Vec<(usize, usize)> = (0..len - 1).map(|j| (j, j + 1)).collect();
        if periodic {
            edges.push((len - 1, 0));
        }
        Self::from_edges(len, &edges)
    }

    /// `width × height` square grid; site `(x, y)` has index `y * width + x`.
    ///
    /// Periodic wrap edges that coincide with existing bonds (a dimension of
    /// size 2) are merged, so such grids have degree below 4.
    pub fn grid(width: usize, height: usize, periodic: bool) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidLattice(format!(
                "grid needs both dimensions ≥ 2, got {width}×{height}"
            )));
        }
        let idx = |x: usize, y: usize| y * width + x;
        let mut edges = Vec::with_capacity(2 * width * height);
        for y in 0..height {
            for x in 0..width {
                if x + 1 < width {
                    edges.push((idx(x, y), idx(x + 1, y)));
                } else if periodic {
                    edges.push((idx(x, y), idx(0, y)));
                }
                if y + 1 < height {
                    edges.push((idx(x, y), idx(x, y + 1)));
                } else if periodic {
                    edges.push((idx(x, y), idx(x, 0)));
                }
            }
        }
        Self::from_edges(width * height, &edges)
    }

    /// Builds a lattice from an explicit edge list. Duplicate and reversed
    /// pairs are merged. A single isolated site (`n = 1`, no edges) is a valid
    /// connected lattice.
    pub fn from_edges(num_sites: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if num_sites == 0 {
            return Err(Error::InvalidLattice("lattice needs at least one site".into()));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for s in [a, b] {
                if s >= num_sites {
                    return Err(Error::SiteOutOfRange { site: s, num_sites });
                }
            }
            if a == b {
                return Err(Error::InvalidLattice(format!("self-loop at site {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();

        let mut neighbors = vec![Vec::new(); num_sites];
        for &(a, b) in &canon {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let max_degree = neighbors.iter().map(Vec::len).max().unwrap_or(0);

        let mut dist = vec![u32::MAX; num_sites * num_sites];
        let mut queue = VecDeque::new();
        for src in 0..num_sites {
            let row = &mut dist[src * num_sites..(src + 1) * num_sites];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &w in &neighbors[u] {
                    if row[w] == u32::MAX {
                        row[w] = du + 1;
                        queue.push_back(w);
                    }
                }
            }
            if let Some(unreached) = row.iter().position(|&d| d == u32::MAX) {
                return Err(Error::Disconnected(unreached));
            }
        }

        Ok(Self {
            num_sites,
            edges: canon,
            neighbors,
            dist,
            max_degree,
        })
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Sorted unordered edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    #[inline]
    pub fn degree(&self, site: usize) -> usize {
        self.neighbors[site].len()
    }

    /// Maximal vertex degree `D`, which is also the max row sum of `M`.
    #[inline]
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `Δ = ‖M‖_∞ / 2`.
    pub fn delta<T: Real>(&self) -> T {
        T::from_count(self.max_degree as u128) / T::lit(2.0)
    }

    #[inline]
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Hop distance between two sites.
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.dist[a * self.num_sites + b] as usize
    }

    /// Dense row-major adjacency matrix `M`.
    pub fn adjacency_matrix<T: Real>(&self) -> Vec<T> {
        let n = self.num_sites;
        let mut m = vec![T::zero(); n * n];
        for &(a, b) in &self.edges {
            m[a * n + b] = T::one();
            m[b * n + a] = T::one();
        }
        m
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site < self.num_sites {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange {
                site,
                num_sites: self.num_sites,
            })
        }
    }

    /// `d(j, R) = min_{r ∈ R} d(j, r)`; zero for `j ∈ R`.
    pub fn distance_to_region(&self, site: usize, region: &[usize]) -> usize {
        region
            .iter()
            .map(|&r| self.distance(site, r))
            .min()
            .unwrap_or(usize::MAX)
    }

    /// Distance `l` between two disjoint, nonempty regions such that
    /// `d(s, r) ≥ l` for every `s ∈ S`, `r ∈ R`.
    pub fn region_distance(&self, s: &[usize], r: &[usize]) -> Result<usize> {
        if s.is_empty() || r.is_empty() {
            return Err(Error::InvalidRegion("regions must be nonempty".into()));
        }
        for &site in s.iter().chain(r) {
            self.check_site(site)?;
        }
        if let Some(shared) = s.iter().find(|x| r.contains(x)) {
            return Err(Error::InvalidRegion(format!(
                "regions overlap at site {shared}"
            )));
        }
        Ok(s.iter()
            .map(|&a| self.distance_to_region(a, r))
            .min()
            .expect("nonempty"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_distance(len: usize, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(len - d)
    }

    #[test]
    fn smallest_chain() {
        let lat = Lattice::chain(2, false).unwrap();
        assert_eq!(lat.edges(), &[(0, 1)]);
        assert_eq!(lat.max_degree(), 1);
        assert_eq!(lat.delta::<f64>(), 0.5);
    }

    #[test]
    fn open_chain_metric() {
        let lat = Lattice::chain(5, false).unwrap();
        assert_eq!(lat.distance(0, 4), 4);
        assert_eq!(lat.max_degree(), 2);
        assert_eq!(lat.delta::<f64>(), 1.0);
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(lat.distance(a, b), a.abs_diff(b));
            }
        }
    }

    #[test]
    fn periodic_chain_metric() {
        let lat = Lattice::chain(6, true).unwrap();
        assert_eq!(lat.distance(0, 4), 2);
        assert_eq!(lat.max_degree(), 2);
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(lat.distance(a, b), ring_distance(6, a, b));
            }
        }
    }

    #[test]
    fn chain_too_short() {
        assert!(matches!(Lattice::chain(1, false), Err(Error::InvalidLattice(_))));
        assert!(Lattice::chain(0, true).is_err());
    }

    #[test]
    fn open_grids() {
        let lat = Lattice::grid(3, 3, false).unwrap();
        assert_eq!(lat.max_degree(), 4);
        assert_eq!(lat.delta::<f64>(), 2.0);
        assert_eq!(lat.distance(0, 8), 4);

        let square = Lattice::grid(2, 2, false).unwrap();
        assert_eq!(square.max_degree(), 2);
        assert_eq!(square.delta::<f64>(), 1.0);
    }

    #[test]
    fn torus_wraps() {
        let lat = Lattice::grid(4, 3, true).unwrap();
        assert_eq!(lat.distance(0, 3), 1);
        assert_eq!(lat.max_degree(), 4);
        for a in 0..12 {
            for b in 0..12 {
                let (ax, ay) = (a % 4, a / 4);
                let (bx, by) = (b % 4, b / 4);
                let expect = ring_distance(4, ax, bx) + ring_distance(3, ay, by);
                assert_eq!(lat.distance(a, b), expect);
            }
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(Lattice::grid(1, 5, false).is_err());
        assert!(Lattice::grid(3, 1, true).is_err());
    }

    #[test]
    fn edge_lists() {
        let path = Lattice::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.max_degree(), 2);
        assert_eq!(path, Lattice::chain(3, false).unwrap());

        let cycle = Lattice::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert!(cycle.distance(a, b) <= 2);
            }
        }

        let dup = Lattice::from_edges(3, &[(0, 1), (1, 0), (2, 1), (1, 2)]).unwrap();
        assert_eq!(dup.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(
            Lattice::from_edges(3, &[(0, 0)]),
            Err(Error::InvalidLattice(_))
        ));
        assert!(matches!(
            Lattice::from_edges(3, &[(0, 3)]),
            Err(Error::SiteOutOfRange { site: 3, .. })
        ));
        assert!(matches!(
            Lattice::from_edges(4, &[(0, 1), (2, 3)]),
            Err(Error::Disconnected(2))
        ));
    }

    #[test]
    fn single_site_is_connected() {
        let lat = Lattice::from_edges(1, &[]).unwrap();
        assert_eq!(lat.max_degree(), 0);
        assert_eq!(lat.distance(0, 0), 0);
    }

    #[test]
    fn region_distances() {
        let chain = Lattice::chain(7, false).unwrap();
        assert_eq!(chain.region_distance(&[6], &[0, 1]).unwrap(), 5);
        assert_eq!(chain.region_distance(&[4, 6], &[0]).unwrap(), 4);

        let grid = Lattice::grid(3, 3, false).unwrap();
        assert_eq!(grid.region_distance(&[8], &[0, 1]).unwrap(), 3);
    }

    #[test]
    fn region_errors() {
        let chain = Lattice::chain(4, false).unwrap();
        assert!(chain.region_distance(&[], &[0]).is_err());
        assert!(chain.region_distance(&[1, 2], &[2]).is_err());
        assert!(chain.region_distance(&[9], &[0]).is_err());
    }
}

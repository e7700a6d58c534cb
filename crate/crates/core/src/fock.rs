//! Occupation-number bases.
//!
//! A [`SectorBasis`] enumerates every occupation configuration with fixed
//! particle number per species, in lexicographic order, and ranks
//! configurations combinatorially. A [`FockSpace`] is a direct sum of such
//! sectors, which is what density-matrix runs with particle loss need.
//!
//! Configurations are stored flattened species-major: entry `s * L + j` is
//! the occupation of species `s` on site `j`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Occupation number of one mode.
pub type Occupation = u16;

/// Exchange statistics of a particle species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Boson,
    Fermion,
    /// Bosons with at most one particle per site (spin-1/2 equivalent).
    Hardcore,
}

/// One particle species: statistics plus per-site occupation cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpeciesSpec {
    statistics: Statistics,
    n_max: Option<u32>,
}

impl SpeciesSpec {
    /// `n_max = None` means unbounded (bosons only). Fermions and hardcore
    /// bosons always have cap 1; any other explicit cap is rejected.
    pub fn new(statistics: Statistics, n_max: Option<u32>) -> Result<Self> {
        match statistics {
            Statistics::Boson => {
                if n_max == Some(0) {
                    return Err(Error::InvalidSector("boson cap must be ≥ 1".into()));
                }
                Ok(Self { statistics, n_max })
            }
            Statistics::Fermion | Statistics::Hardcore => {
                if matches!(n_max, Some(c) if c != 1) {
                    return Err(Error::InvalidSector(format!(
                        "{statistics:?} species have occupation cap 1"
                    )));
                }
                Ok(Self {
                    statistics,
                    n_max: Some(1),
                })
            }
        }
    }

    pub fn boson() -> Self {
        Self {
            statistics: Statistics::Boson,
            n_max: None,
        }
    }

    pub fn fermion() -> Self {
        Self {
            statistics: Statistics::Fermion,
            n_max: Some(1),
        }
    }

    pub fn hardcore() -> Self {
        Self {
            statistics: Statistics::Hardcore,
            n_max: Some(1),
        }
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn cap(&self) -> Option<u32> {
        self.n_max
    }

    /// True when occupations never exceed one (fermions and hardcore bosons).
    pub fn is_exclusive(&self) -> bool {
        self.n_max == Some(1)
    }
}

/// Site-and-species address of a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub site: usize,
    pub species: usize,
}

impl Mode {
    pub fn new(site: usize, species: usize) -> Self {
        Self { site, species }
    }

    /// Species 0 on `site`.
    pub fn site(site: usize) -> Self {
        Self { site, species: 0 }
    }
}

/// Fixed-N configurations of a single species on `num_sites` sites.
#[derive(Debug, Clone)]
struct SpeciesSector {
    num_sites: usize,
    particles: u32,
    cap: u32,
    /// `cumulative[m * (N + 1) + k] = Σ_{i ≤ k} W(m, i)`, where `W(m, i)` counts
    /// placements of exactly `i` particles on `m` sites under the cap.
    cumulative: Vec<u64>,
    states: Vec<Occupation>,
}

impl SpeciesSector {
    fn count_table(num_sites: usize, particles: u32, cap: u32) -> Vec<u64> {
        let width = particles as usize + 1;
        let mut ways = vec![0u64; (num_sites + 1) * width];
        ways[0] = 1;
        for m in 1..=num_sites {
            for k in 0..width {
                let mut acc = 0u64;
                for v in 0..=k.min(cap as usize) {
                    acc = acc.saturating_add(ways[(m - 1) * width + k - v]);
                }
                ways[m * width + k] = acc;
            }
        }
        let mut cumulative = ways;
        for m in 0..=num_sites {
            for k in 1..width {
                let prev = cumulative[m * width + k - 1];
                let cur = &mut cumulative[m * width + k];
                *cur = cur.saturating_add(prev);
            }
        }
        cumulative
    }

    fn effective_cap(spec: &SpeciesSpec, particles: u32) -> u32 {
        spec.cap().map_or(particles, |c| c.min(particles))
    }

    fn dimension(num_sites: usize, spec: &SpeciesSpec, particles: u32) -> u64 {
        let cap = Self::effective_cap(spec, particles);
        let cum = Self::count_table(num_sites, particles, cap);
        let width = particles as usize + 1;
        let at = |k: usize| cum[num_sites * width + k];
        at(particles as usize) - if particles > 0 { at(particles as usize - 1) } else { 0 }
    }

    fn enumerate(num_sites: usize, spec: &SpeciesSpec, particles: u32) -> Self {
        let cap = Self::effective_cap(spec, particles);
        let cumulative = Self::count_table(num_sites, particles, cap);
        let mut states = Vec::new();
        let mut current = vec![0 as Occupation; num_sites];
        fill(&mut current, 0, particles, cap, &mut states);
        Self {
            num_sites,
            particles,
            cap,
            cumulative,
            states,
        }
    }

    #[inline]
    fn dim(&self) -> usize {
        self.states.len() / self.num_sites.max(1)
    }

    #[inline]
    fn state(&self, index: usize) -> &[Occupation] {
        &self.states[index * self.num_sites..(index + 1) * self.num_sites]
    }

    /// Number of configurations of `remaining` particles on `sites` sites
    /// whose first entry is strictly less than `first` (`first ≤ remaining`).
    #[inline]
    fn smaller_prefix(&self, sites: usize, remaining: u32, first: u32) -> u64 {
        // Σ_{v < first} W(sites - 1, remaining - v)
        let width = self.particles as usize + 1;
        let row = (sites - 1) * width;
        self.cumulative[row + remaining as usize] - self.cumulative[row + (remaining - first) as usize]
    }

    fn rank(&self, occ: &[Occupation]) -> Option<usize> {
        if occ.len() != self.num_sites {
            return None;
        }
        let total: u32 = occ.iter().map(|&n| n as u32).sum();
        if total != self.particles || occ.iter().any(|&n| n as u32 > self.cap) {
            return None;
        }
        let mut rank = 0u64;
        let mut remaining = self.particles;
        for (j, &n) in occ.iter().enumerate() {
            let sites = self.num_sites - j;
            if n > 0 {
                rank += self.smaller_prefix(sites, remaining, n as u32);
            }
            remaining -= n as u32;
        }
        Some(rank as usize)
    }
}

fn fill(
    current: &mut [Occupation],
    pos: usize,
    remaining: u32,
    cap: u32,
    out: &mut Vec<Occupation>,
) {
    let len = current.len();
    if pos + 1 == len {
        if remaining <= cap {
            current[pos] = remaining as Occupation;
            out.extend_from_slice(current);
        }
        return;
    }
    let rest = (len - pos - 1) as u32;
    // Smallest value at `pos` that still lets the remaining sites absorb the rest.
    let lo = remaining.saturating_sub(rest.saturating_mul(cap));
    for v in lo..=remaining.min(cap) {
        current[pos] = v as Occupation;
        fill(current, pos + 1, remaining - v, cap, out);
    }
    current[pos] = 0;
}

/// Exact result of applying a product of ladder operators to a configuration:
/// amplitude `±sqrt(weight)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LadderWeight {
    pub weight: u128,
    pub negative: bool,
}

impl LadderWeight {
    pub const ONE: Self = Self {
        weight: 1,
        negative: false,
    };

    pub fn amplitude<T: Real>(self) -> T {
        let a = T::from_count(self.weight).sqrt();
        if self.negative {
            -a
        } else {
            a
        }
    }

    fn combine(self, other: Self) -> Self {
        Self {
            weight: self.weight.saturating_mul(other.weight),
            negative: self.negative ^ other.negative,
        }
    }
}

/// Applies `(b†)^create b^annihilate` on `mode` to a flattened configuration in
/// place. Returns `None` if the result vanishes.
pub(crate) fn apply_ladder(
    species: &[SpeciesSpec],
    num_sites: usize,
    occ: &mut [Occupation],
    mode: Mode,
    create: u32,
    annihilate: u32,
) -> Option<LadderWeight> {
    let spec = &species[mode.species];
    let base = mode.species * num_sites;
    let n = occ[base + mode.site] as u32;
    if annihilate > n {
        return None;
    }
    let mid = n - annihilate;
    let top = mid + create;
    if let Some(cap) = spec.cap() {
        if top > cap {
            return None;
        }
    }
    if top > Occupation::MAX as u32 {
        return None;
    }
    // n!/(n-q)! · (n-q+p)!/(n-q)!
    let mut weight: u128 = 1;
    for k in (mid + 1)..=n {
        weight = weight.saturating_mul(k as u128);
    }
    for k in (mid + 1)..=top {
        weight = weight.saturating_mul(k as u128);
    }
    let negative = if spec.statistics() == Statistics::Fermion && (create + annihilate) % 2 == 1 {
        let string: u32 = occ[base..base + mode.site].iter().map(|&x| x as u32).sum();
        string % 2 == 1
    } else {
        false
    };
    occ[base + mode.site] = top as Occupation;
    Some(LadderWeight { weight, negative })
}

/// Applies the hop `b†_to b_from` of one species in place.
pub(crate) fn apply_hop_in_place(
    species: &[SpeciesSpec],
    num_sites: usize,
    occ: &mut [Occupation],
    species_index: usize,
    from: usize,
    to: usize,
) -> Option<LadderWeight> {
    let first = apply_ladder(species, num_sites, occ, Mode::new(from, species_index), 0, 1)?;
    let second = apply_ladder(species, num_sites, occ, Mode::new(to, species_index), 1, 0)?;
    Some(first.combine(second))
}

/// Applies a sequence of `(mode, create, annihilate)` factors right to left,
/// i.e. the last factor acts first.
pub(crate) fn apply_ladder_product(
    species: &[SpeciesSpec],
    num_sites: usize,
    occ: &mut [Occupation],
    factors: &[(Mode, u32, u32)],
) -> Option<LadderWeight> {
    let mut acc = LadderWeight::ONE;
    for &(mode, create, annihilate) in factors.iter().rev() {
        acc = acc.combine(apply_ladder(species, num_sites, occ, mode, create, annihilate)?);
    }
    Some(acc)
}

/// Basis of one fixed-particle-number sector: the tensor product of per-species
/// fixed-N bases, indexed row-major with species 0 most significant.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    num_sites: usize,
    species: Vec<SpeciesSpec>,
    particle_numbers: Vec<u32>,
    parts: Vec<SpeciesSector>,
    strides: Vec<usize>,
    dim: usize,
}

impl SectorBasis {
    fn validate(num_sites: usize, species: &[SpeciesSpec], particles: &[u32]) -> Result<()> {
        if num_sites == 0 {
            return Err(Error::InvalidSector("sector needs at least one site".into()));
        }
        if species.is_empty() {
            return Err(Error::InvalidSector("at least one species is required".into()));
        }
        if species.len() != particles.len() {
            return Err(Error::InvalidSector(format!(
                "{} species but {} particle numbers",
                species.len(),
                particles.len()
            )));
        }
        for (s, (spec, &n)) in species.iter().zip(particles).enumerate() {
            if let Some(cap) = spec.cap() {
                if n as u64 > cap as u64 * num_sites as u64 {
                    return Err(Error::InvalidSector(format!(
                        "species {s}: {n} particles exceed capacity {} on {num_sites} sites",
                        cap as u64 * num_sites as u64
                    )));
                }
            }
            if n > Occupation::MAX as u32 {
                return Err(Error::InvalidSector(format!("species {s}: too many particles")));
            }
        }
        Ok(())
    }

    /// Sector dimension without enumerating it, saturating on overflow.
    pub fn dimension_of(num_sites: usize, species: &[SpeciesSpec], particles: &[u32]) -> Result<u128> {
        Self::validate(num_sites, species, particles)?;
        Ok(species
            .iter()
            .zip(particles)
            .map(|(spec, &n)| SpeciesSector::dimension(num_sites, spec, n) as u128)
            .fold(1u128, |a, b| a.saturating_mul(b)))
    }

    /// Enumerates the sector with `particles[s]` particles of species `s`.
    pub fn enumerate(num_sites: usize, species: &[SpeciesSpec], particles: &[u32]) -> Result<Self> {
        let dim = Self::dimension_of(num_sites, species, particles)?;
        if dim > usize::MAX as u128 / 2 {
            return Err(Error::ResourceLimit(format!("sector dimension {dim} overflows")));
        }
        let parts: Vec<SpeciesSector> = species
            .iter()
            .zip(particles)
            .map(|(spec, &n)| SpeciesSector::enumerate(num_sites, spec, n))
            .collect();
        let mut strides = vec![1usize; parts.len()];
        for s in (0..parts.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * parts[s + 1].dim();
        }
        let dim = parts.iter().map(SpeciesSector::dim).product();
        Ok(Self {
            num_sites,
            species: species.to_vec(),
            particle_numbers: particles.to_vec(),
            parts,
            strides,
            dim,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn species(&self) -> &[SpeciesSpec] {
        &self.species
    }

    pub fn particle_numbers(&self) -> &[u32] {
        &self.particle_numbers
    }

    /// Writes the configuration of `index` into `out` (length `S * L`).
    pub fn write_state(&self, index: usize, out: &mut [Occupation]) -> Result<()> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        let l = self.num_sites;
        let mut rest = index;
        for (s, part) in self.parts.iter().enumerate() {
            let local = rest / self.strides[s];
            rest %= self.strides[s];
            out[s * l..(s + 1) * l].copy_from_slice(part.state(local));
        }
        Ok(())
    }

    /// Configuration at `index`.
    pub fn unrank(&self, index: usize) -> Result<Vec<Occupation>> {
        let mut out = vec![0; self.num_sites * self.species.len()];
        self.write_state(index, &mut out)?;
        Ok(out)
    }

    /// Index of a configuration, or `None` if it does not belong to the sector.
    pub fn try_rank(&self, occ: &[Occupation]) -> Option<usize> {
        let l = self.num_sites;
        if occ.len() != l * self.species.len() {
            return None;
        }
        let mut index = 0;
        for (s, part) in self.parts.iter().enumerate() {
            index += part.rank(&occ[s * l..(s + 1) * l])? * self.strides[s];
        }
        Some(index)
    }

    pub fn rank(&self, occ: &[Occupation]) -> Result<usize> {
        self.try_rank(occ).ok_or_else(|| {
            Error::NotInBasis(format!(
                "{occ:?} is not a configuration with particle numbers {:?}",
                self.particle_numbers
            ))
        })
    }

    /// Action of `b†_to b_from` for one species on basis state `index`:
    /// target index and amplitude, or `None` if the hop annihilates the state.
    pub fn apply_hop<T: Real>(
        &self,
        species: usize,
        from: usize,
        to: usize,
        index: usize,
    ) -> Result<Option<(usize, T)>> {
        if species >= self.species.len() {
            return Err(Error::InvalidArgument(format!("species {species} out of range")));
        }
        for site in [from, to] {
            if site >= self.num_sites {
                return Err(Error::SiteOutOfRange {
                    site,
                    num_sites: self.num_sites,
                });
            }
        }
        if from == to {
            return Err(Error::InvalidArgument("hop needs two distinct sites".into()));
        }
        let mut occ = self.unrank(index)?;
        Ok(
            apply_hop_in_place(&self.species, self.num_sites, &mut occ, species, from, to)
                .map(|w| (self.try_rank(&occ).expect("hopping conserves particle number"), w.amplitude())),
        )
    }
}

/// Direct sum of particle-number sectors over a common lattice and species set.
#[derive(Debug, Clone)]
pub struct FockSpace {
    num_sites: usize,
    species: Vec<SpeciesSpec>,
    sectors: Vec<SectorBasis>,
    offsets: Vec<usize>,
    dim: usize,
    table: Vec<Occupation>,
    lookup: HashMap<Vec<u32>, usize>,
}

impl FockSpace {
    /// Builds the direct sum of the given sectors, ordered by particle numbers.
    pub fn from_sectors(mut sectors: Vec<SectorBasis>) -> Result<Self> {
        let first = sectors
            .first()
            .ok_or_else(|| Error::InvalidSector("a Fock space needs at least one sector".into()))?;
        let num_sites = first.num_sites();
        let species = first.species().to_vec();
        for s in &sectors {
            if s.num_sites() != num_sites || s.species() != species.as_slice() {
                return Err(Error::IncompatibleBasis(
                    "all sectors must share lattice size and species".into(),
                ));
            }
        }
        sectors.sort_by(|a, b| a.particle_numbers().cmp(b.particle_numbers()));
        let mut lookup = HashMap::new();
        let mut offsets = Vec::with_capacity(sectors.len());
        let mut dim = 0;
        for (k, s) in sectors.iter().enumerate() {
            if lookup.insert(s.particle_numbers().to_vec(), k).is_some() {
                return Err(Error::InvalidSector(format!(
                    "duplicate sector {:?}",
                    s.particle_numbers()
                )));
            }
            offsets.push(dim);
            dim += s.dim();
        }
        let width = num_sites * species.len();
        let mut table = vec![0; dim * width];
        for (s, &off) in sectors.iter().zip(&offsets) {
            for i in 0..s.dim() {
                s.write_state(i, &mut table[(off + i) * width..(off + i + 1) * width])?;
            }
        }
        Ok(Self {
            num_sites,
            species,
            sectors,
            offsets,
            dim,
            table,
            lookup,
        })
    }

    pub fn single(sector: SectorBasis) -> Self {
        Self::from_sectors(vec![sector]).expect("one sector is always valid")
    }

    /// Enumerates and sums the listed sectors.
    pub fn with_sectors(num_sites: usize, species: &[SpeciesSpec], particle_numbers: &[Vec<u32>]) -> Result<Self> {
        let sectors = particle_numbers
            .iter()
            .map(|n| SectorBasis::enumerate(num_sites, species, n))
            .collect::<Result<Vec<_>>>()?;
        Self::from_sectors(sectors)
    }

    /// All sectors with `N_s ≤ max_particles[s]` for every species: the space
    /// reachable from `max_particles` under particle loss.
    pub fn up_to(num_sites: usize, species: &[SpeciesSpec], max_particles: &[u32]) -> Result<Self> {
        Self::with_sectors(num_sites, species, &loss_closure(max_particles))
    }

    /// Total dimension of every sector in [`FockSpace::up_to`] without enumeration.
    pub fn dimension_up_to(num_sites: usize, species: &[SpeciesSpec], max_particles: &[u32]) -> Result<u128> {
        let mut total = 0u128;
        for n in loss_closure(max_particles) {
            total = total.saturating_add(SectorBasis::dimension_of(num_sites, species, &n)?);
        }
        Ok(total)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn species(&self) -> &[SpeciesSpec] {
        &self.species
    }

    #[inline]
    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn sectors(&self) -> &[SectorBasis] {
        &self.sectors
    }

    pub fn sector_offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Width of one flattened configuration (`S * L`).
    #[inline]
    pub fn width(&self) -> usize {
        self.num_sites * self.species.len()
    }

    /// Flattened configuration of global basis index `index`.
    #[inline]
    pub fn occupations(&self, index: usize) -> &[Occupation] {
        let w = self.width();
        &self.table[index * w..(index + 1) * w]
    }

    #[inline]
    pub fn occupation(&self, index: usize, mode: Mode) -> Occupation {
        self.table[index * self.width() + mode.species * self.num_sites + mode.site]
    }

    /// Total occupation of `site` summed over species.
    #[inline]
    pub fn site_occupation(&self, index: usize, site: usize) -> u32 {
        (0..self.species.len())
            .map(|s| self.occupation(index, Mode::new(site, s)) as u32)
            .sum()
    }

    /// Total particle number of a basis state, summed over species.
    pub fn total_particles(&self, index: usize) -> u32 {
        self.occupations(index).iter().map(|&n| n as u32).sum()
    }

    /// Global index of a configuration, or `None` if its sector is absent.
    pub fn locate(&self, occ: &[Occupation]) -> Option<usize> {
        if occ.len() != self.width() {
            return None;
        }
        let l = self.num_sites;
        let key: Vec<u32> = (0..self.species.len())
            .map(|s| occ[s * l..(s + 1) * l].iter().map(|&n| n as u32).sum())
            .collect();
        let &k = self.lookup.get(&key)?;
        Some(self.offsets[k] + self.sectors[k].try_rank(occ)?)
    }

    /// True when removing one particle of any species from any sector lands in
    /// a sector that is also present.
    pub fn closed_under_loss(&self) -> bool {
        self.sectors.iter().all(|s| {
            let n = s.particle_numbers();
            (0..n.len()).all(|sp| {
                n[sp] == 0 || {
                    let mut lower = n.to_vec();
                    lower[sp] -= 1;
                    self.lookup.contains_key(&lower)
                }
            })
        })
    }
}

fn loss_closure(max_particles: &[u32]) -> Vec<Vec<u32>> {
    let mut all = vec![Vec::new()];
    for &m in max_particles {
        all = all
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                (0..=m).map(move |n| {
                    let mut v = prefix.clone();
                    v.push(n);
                    v
                })
            })
            .collect();
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    /// Brute force: every tuple in `[0, cap]^L` with the right total, in
    /// lexicographic order.
    fn brute_force(num_sites: usize, particles: u32, cap: u32) -> Vec<Vec<Occupation>> {
        let mut out = Vec::new();
        let base = cap as usize + 1;
        let total = base.pow(num_sites as u32);
        for code in 0..total {
            let mut c = code;
            let mut occ = vec![0; num_sites];
            for j in (0..num_sites).rev() {
                occ[j] = (c % base) as Occupation;
                c /= base;
            }
            if occ.iter().map(|&n| n as u32).sum::<u32>() == particles {
                out.push(occ);
            }
        }
        out
    }

    #[test]
    fn two_site_single_boson() {
        let b = SectorBasis::enumerate(2, &[SpeciesSpec::boson()], &[1]).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.unrank(0).unwrap(), vec![0, 1]);
        assert_eq!(b.unrank(1).unwrap(), vec![1, 0]);
        assert_eq!(b.rank(&[0, 1]).unwrap(), 0);
        assert_eq!(b.rank(&[1, 0]).unwrap(), 1);
        assert!(matches!(b.rank(&[2, 0]), Err(Error::NotInBasis(_))));
    }

    #[test]
    fn boson_sector_matches_brute_force() {
        let b = SectorBasis::enumerate(12, &[SpeciesSpec::boson()], &[3]).unwrap();
        assert_eq!(b.dim(), 364);
        assert_eq!(b.dim() as u64, binomial(14, 3));
        let expect = brute_force(12, 3, 3);
        assert_eq!(expect.len(), 364);
        for (i, occ) in expect.iter().enumerate() {
            assert_eq!(&b.unrank(i).unwrap(), occ);
            assert_eq!(b.rank(occ).unwrap(), i);
        }
    }

    #[test]
    fn fermion_and_capped_sectors() {
        let f = SectorBasis::enumerate(4, &[SpeciesSpec::fermion()], &[2]).unwrap();
        assert_eq!(f.dim(), 6);
        let capped = SpeciesSpec::new(Statistics::Boson, Some(2)).unwrap();
        let b = SectorBasis::enumerate(5, &[capped], &[4]).unwrap();
        let expect = brute_force(5, 4, 2);
        assert_eq!(b.dim(), expect.len());
        for (i, occ) in expect.iter().enumerate() {
            assert_eq!(b.rank(occ).unwrap(), i);
        }
    }

    #[test]
    fn sector_errors() {
        assert!(SectorBasis::enumerate(3, &[SpeciesSpec::fermion()], &[4]).is_err());
        assert!(SectorBasis::enumerate(3, &[SpeciesSpec::hardcore()], &[4]).is_err());
        assert!(SectorBasis::enumerate(3, &[SpeciesSpec::boson()], &[1, 1]).is_err());
        assert!(SpeciesSpec::new(Statistics::Fermion, Some(2)).is_err());
        assert!(SpeciesSpec::new(Statistics::Boson, Some(0)).is_err());
        let b = SectorBasis::enumerate(3, &[SpeciesSpec::boson()], &[1]).unwrap();
        assert!(matches!(b.unrank(3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn empty_sector_has_vacuum() {
        let b = SectorBasis::enumerate(4, &[SpeciesSpec::boson()], &[0]).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.unrank(0).unwrap(), vec![0; 4]);
    }

    #[test]
    fn multi_species_product_order() {
        let sp = [SpeciesSpec::boson(), SpeciesSpec::fermion()];
        let b = SectorBasis::enumerate(2, &sp, &[1, 1]).unwrap();
        assert_eq!(b.dim(), 4);
        let states: Vec<_> = (0..4).map(|i| b.unrank(i).unwrap()).collect();
        let mut sorted = states.clone();
        sorted.sort();
        assert_eq!(states, sorted);
        for (i, s) in states.iter().enumerate() {
            assert_eq!(b.rank(s).unwrap(), i);
        }
    }

    #[test]
    fn boson_hops() {
        let b = SectorBasis::enumerate(2, &[SpeciesSpec::boson()], &[1]).unwrap();
        let from = b.rank(&[1, 0]).unwrap();
        let (to, amp) = b.apply_hop::<f64>(0, 0, 1, from).unwrap().unwrap();
        assert_eq!(b.unrank(to).unwrap(), vec![0, 1]);
        assert_eq!(amp, 1.0);

        let b3 = SectorBasis::enumerate(2, &[SpeciesSpec::boson()], &[3]).unwrap();
        let from = b3.rank(&[2, 1]).unwrap();
        let (to, amp) = b3.apply_hop::<f64>(0, 0, 1, from).unwrap().unwrap();
        assert_eq!(b3.unrank(to).unwrap(), vec![1, 2]);
        assert_eq!(amp, 2.0);

        let empty = b3.rank(&[0, 3]).unwrap();
        assert!(b3.apply_hop::<f64>(0, 0, 1, empty).unwrap().is_none());
    }

    #[test]
    fn fermion_hop_signs() {
        let f = SectorBasis::enumerate(3, &[SpeciesSpec::fermion()], &[2]).unwrap();
        // Adjacent sites in the ordering carry no string.
        let from = f.rank(&[1, 0, 1]).unwrap();
        let (to, amp) = f.apply_hop::<f64>(0, 2, 1, from).unwrap().unwrap();
        assert_eq!(f.unrank(to).unwrap(), vec![1, 1, 0]);
        assert_eq!(amp, 1.0);
        // Hopping over an occupied site picks up a minus sign.
        let from = f.rank(&[0, 1, 1]).unwrap();
        let (to, amp) = f.apply_hop::<f64>(0, 2, 0, from).unwrap().unwrap();
        assert_eq!(f.unrank(to).unwrap(), vec![1, 1, 0]);
        assert_eq!(amp, -1.0);
        // Pauli blocking.
        let from = f.rank(&[1, 1, 0]).unwrap();
        assert!(f.apply_hop::<f64>(0, 0, 1, from).unwrap().is_none());
    }

    #[test]
    fn hardcore_hops() {
        let h = SectorBasis::enumerate(3, &[SpeciesSpec::hardcore()], &[2]).unwrap();
        let from = h.rank(&[0, 1, 1]).unwrap();
        let (_, amp) = h.apply_hop::<f64>(0, 2, 0, from).unwrap().unwrap();
        assert_eq!(amp, 1.0);
        let blocked = h.rank(&[1, 1, 0]).unwrap();
        assert!(h.apply_hop::<f64>(0, 0, 1, blocked).unwrap().is_none());
    }

    #[test]
    fn hop_errors() {
        let b = SectorBasis::enumerate(3, &[SpeciesSpec::boson()], &[1]).unwrap();
        assert!(b.apply_hop::<f64>(0, 0, 3, 0).is_err());
        assert!(b.apply_hop::<f64>(0, 1, 1, 0).is_err());
        assert!(b.apply_hop::<f64>(1, 0, 1, 0).is_err());
    }

    #[test]
    fn ladder_weights() {
        let sp = [SpeciesSpec::boson()];
        let mut occ = vec![2, 0];
        let w = apply_ladder(&sp, 2, &mut occ, Mode::site(0), 2, 2).unwrap();
        assert_eq!(w.weight, 4); // (b†)^2 b^2 |2⟩ = 2 |2⟩ → amplitude sqrt(4)
        assert_eq!(occ, vec![2, 0]);
        let mut occ = vec![1, 0];
        assert!(apply_ladder(&sp, 2, &mut occ, Mode::site(0), 0, 2).is_none());
    }

    #[test]
    fn fock_space_lookup_and_loss_closure() {
        let sp = [SpeciesSpec::boson()];
        let space = FockSpace::up_to(3, &sp, &[2]).unwrap();
        assert_eq!(space.dim(), 1 + 3 + 6);
        assert!(space.closed_under_loss());
        for i in 0..space.dim() {
            assert_eq!(space.locate(space.occupations(i)), Some(i));
        }
        let top = FockSpace::with_sectors(3, &sp, &[vec![2]]).unwrap();
        assert!(!top.closed_under_loss());
        assert_eq!(top.locate(&[1, 0, 0]), None);
        assert_eq!(FockSpace::dimension_up_to(3, &sp, &[2]).unwrap(), 10);
    }
}

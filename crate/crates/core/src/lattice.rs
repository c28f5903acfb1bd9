//! Fractal and regular lattices as planar point sets.
//!
//! Every lattice is stored in units of the nearest-neighbour spacing. Edges are
//! never specified by hand: two sites are coupled exactly when their Euclidean
//! distance is one spacing (within [`EDGE_TOLERANCE`]). Sites are ordered
//! top row first, left to right, so site 0 is always the apex of a gasket or
//! the top-left corner of a carpet.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance of the nearest-neighbour distance rule.
pub const EDGE_TOLERANCE: f64 = 1e-6;
/// Two sites closer than this are considered duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

pub const SG_GENERATIONS: (u32, u32) = (1, 7);
pub const SC_GENERATIONS: (u32, u32) = (1, 4);
pub const DSC_GENERATIONS: (u32, u32) = (1, 4);
pub const REGULAR_SIZE: (u32, u32) = (1, 64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    /// Sierpinski gasket.
    Sg,
    /// Sierpinski carpet.
    Sc,
    /// Dual Sierpinski carpet.
    Dsc,
    /// Filled triangular lattice.
    Triangle,
    /// Filled square vertex grid.
    Square,
    /// Arbitrary point set, edges from the distance rule.
    Custom,
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 6] = [
        LatticeKind::Sg,
        LatticeKind::Sc,
        LatticeKind::Dsc,
        LatticeKind::Triangle,
        LatticeKind::Square,
        LatticeKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LatticeKind::Sg => "sg",
            LatticeKind::Sc => "sc",
            LatticeKind::Dsc => "dsc",
            LatticeKind::Triangle => "triangle",
            LatticeKind::Square => "square",
            LatticeKind::Custom => "custom",
        }
    }

    pub fn is_fractal(self) -> bool {
        matches!(self, LatticeKind::Sg | LatticeKind::Sc | LatticeKind::Dsc)
    }

    /// Dimensions of the lattice family. `None` for custom point sets.
    pub fn meta(self) -> Option<FractalMeta> {
        let gasket_df = 3f64.ln() / 2f64.ln();
        let carpet_df = 8f64.ln() / 3f64.ln();
        let meta = match self {
            LatticeKind::Sg => FractalMeta {
                fractal_dimension: gasket_df,
                spectral_dimension: Some(2.0 * 3f64.ln() / 5f64.ln()),
                embedding_dimension: 2,
            },
            LatticeKind::Sc | LatticeKind::Dsc => FractalMeta {
                fractal_dimension: carpet_df,
                spectral_dimension: None,
                embedding_dimension: 2,
            },
            LatticeKind::Triangle | LatticeKind::Square => FractalMeta {
                fractal_dimension: 2.0,
                spectral_dimension: Some(2.0),
                embedding_dimension: 2,
            },
            LatticeKind::Custom => return None,
        };
        Some(meta)
    }
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LatticeKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Malformed(format!("unknown lattice kind `{s}`")))
    }
}

/// Hausdorff, spectral and embedding dimensions of a lattice family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractalMeta {
    pub fractal_dimension: f64,
    /// Known in closed form for the gasket and the regular lattices only.
    pub spectral_dimension: Option<f64>,
    pub embedding_dimension: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Site {
    pub fn distance(&self, other: &Site) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn distance_to(&self, (x, y): (f64, f64)) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    kind: LatticeKind,
    generation: u32,
    spacing: f64,
    sites: Vec<Site>,
    edges: Vec<(usize, usize)>,
}

impl Lattice {
    /// Builds a lattice from raw coordinates, deriving edges from the distance rule.
    ///
    /// Sites keep the order of `points`. Fails on duplicate or non-finite coordinates.
    pub fn from_points(kind: LatticeKind, generation: u32, points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Malformed("lattice has no sites".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Malformed("non-finite site coordinate".into()));
        }
        let sites: Vec<Site> = points
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Site { id, x, y })
            .collect();
        let spacing = 1.0;
        let edges = distance_edges(&sites, spacing)?;
        Ok(Lattice {
            kind,
            generation,
            spacing,
            sites,
            edges,
        })
    }

    /// Reassembles a lattice from stored parts and checks that the edge set
    /// obeys the distance rule exactly.
    pub fn from_parts(
        kind: LatticeKind,
        generation: u32,
        spacing: f64,
        sites: Vec<Site>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if (spacing - 1.0).abs() > 0.0 {
            return Err(Error::Malformed(format!(
                "unsupported spacing {spacing}, expected 1.0"
            )));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.id != i {
                return Err(Error::Malformed(format!(
                    "site ids must be contiguous, found {} at {i}",
                    s.id
                )));
            }
        }
        let points: Vec<(f64, f64)> = sites.iter().map(|s| (s.x, s.y)).collect();
        let rebuilt = Lattice::from_points(kind, generation, &points)?;
        let mut given: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        given.sort_unstable();
        if given != rebuilt.edges {
            return Err(Error::Malformed(
                "edge set does not match the nearest-neighbour distance rule".into(),
            ));
        }
        Ok(Lattice { sites, ..rebuilt })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Generation for fractals; rows or side length for regular lattices.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Unordered pairs `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, id: usize) -> Result<&Site> {
        self.sites
            .get(id)
            .ok_or_else(|| Error::bounds("site id", id, format!("0..{}", self.sites.len())))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.sites.len()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.sites.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Hop counts from `source`; `None` for unreachable sites.
    pub fn hop_distances(&self, source: usize) -> Result<Vec<Option<usize>>> {
        self.site(source)?;
        let adj = self.adjacency();
        let mut dist = vec![None; self.sites.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    pub fn is_connected(&self) -> bool {
        self.hop_distances(0)
            .map(|d| d.iter().all(Option::is_some))
            .unwrap_or(false)
    }

    /// Euclidean distance of every site from `input`, in spacings.
    pub fn distances_from(&self, input: usize) -> Result<Vec<f64>> {
        let origin = *self.site(input)?;
        Ok(self.sites.iter().map(|s| s.distance(&origin)).collect())
    }

    /// Site with the largest `y`, ties broken by the smallest `x`.
    fn top_left(&self) -> usize {
        self.sites
            .iter()
            .min_by(|a, b| {
                b.y.partial_cmp(&a.y)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.x.partial_cmp(&b.x).unwrap_or(std::cmp::Ordering::Equal))
            })
            .map(|s| s.id)
            .unwrap_or(0)
    }

    /// Canonical input: the apex for gaskets and triangles, the top-left corner otherwise.
    pub fn canonical_input(&self) -> usize {
        self.top_left()
    }
}

/// Nearest-neighbour pairs of `sites` using a unit-cell bucket grid.
fn distance_edges(sites: &[Site], spacing: f64) -> Result<Vec<(usize, usize)>> {
    let key = |s: &Site| {
        (
            (s.x / spacing).floor() as i64,
            (s.y / spacing).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for s in sites {
        buckets.entry(key(s)).or_default().push(s.id);
    }
    let lo = (1.0 - EDGE_TOLERANCE) * spacing;
    let hi = (1.0 + EDGE_TOLERANCE) * spacing;
    let mut edges = Vec::new();
    for s in sites {
        let (kx, ky) = key(s);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= s.id {
                        continue;
                    }
                    let d = s.distance(&sites[j]);
                    if d < DUPLICATE_TOLERANCE {
                        return Err(Error::Malformed(format!(
                            "sites {} and {j} share coordinates ({}, {})",
                            s.id, s.x, s.y
                        )));
                    }
                    if (lo..=hi).contains(&d) {
                        edges.push((s.id, j));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

fn check_range(what: &'static str, value: u32, (lo, hi): (u32, u32)) -> Result<()> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(Error::bounds(what, value, format!("{lo}..={hi}")))
    }
}

/// Triangular-lattice coordinates: row `r` from the apex, column `c` in `0..=r`.
fn triangular_point(r: i64, c: i64) -> (f64, f64) {
    (c as f64 - r as f64 / 2.0, -(r as f64) * SQRT3_2)
}

/// Square-grid vertex `(i, j)`, `j` counting rows downward.
fn square_point(i: i64, j: i64) -> (f64, f64) {
    (i as f64, -(j as f64))
}

/// Centre of carpet cell `(i, j)`.
fn cell_point(i: i64, j: i64) -> (f64, f64) {
    (i as f64 + 0.5, -(j as f64 + 0.5))
}

fn gasket_keys(side: i64) -> Vec<(i64, i64)> {
    fn recurse(r: i64, c: i64, side: i64, out: &mut HashSet<(i64, i64)>) {
        if side == 1 {
            out.extend([(r, c), (r + 1, c), (r + 1, c + 1)]);
            return;
        }
        let h = side / 2;
        recurse(r, c, h, out);
        recurse(r + h, c, h, out);
        recurse(r + h, c + h, h, out);
    }
    let mut keys = HashSet::new();
    recurse(0, 0, side, &mut keys);
    let mut keys: Vec<_> = keys.into_iter().collect();
    keys.sort_unstable();
    keys
}

/// Whether cell `(i, j)` survives in a carpet (no base-3 digit pair equals (1, 1)).
fn carpet_cell_kept(mut i: i64, mut j: i64) -> bool {
    while i > 0 || j > 0 {
        if i % 3 == 1 && j % 3 == 1 {
            return false;
        }
        i /= 3;
        j /= 3;
    }
    true
}

/// Kept carpet cells as `(row, column)`, sorted row-major.
fn carpet_cells(generation: u32) -> Vec<(i64, i64)> {
    let n = 3i64.pow(generation);
    (0..n)
        .flat_map(|j| (0..n).map(move |i| (j, i)))
        .filter(|&(j, i)| carpet_cell_kept(i, j))
        .collect()
}

/// Sierpinski gasket of the given generation; sites are the corners of the
/// smallest remaining triangles.
pub fn generate_sierpinski_gasket(generation: u32) -> Result<Lattice> {
    check_range("gasket generation", generation, SG_GENERATIONS)?;
    let points: Vec<_> = gasket_keys(1 << generation)
        .into_iter()
        .map(|(r, c)| triangular_point(r, c))
        .collect();
    Lattice::from_points(LatticeKind::Sg, generation, &points)
}

/// Sierpinski carpet; sites are the corners of the smallest remaining squares.
pub fn generate_sierpinski_carpet(generation: u32) -> Result<Lattice> {
    check_range("carpet generation", generation, SC_GENERATIONS)?;
    let mut keys = HashSet::new();
    for (j, i) in carpet_cells(generation) {
        keys.extend([(j, i), (j, i + 1), (j + 1, i), (j + 1, i + 1)]);
    }
    let mut keys: Vec<_> = keys.into_iter().collect();
    keys.sort_unstable();
    let points: Vec<_> = keys.into_iter().map(|(j, i)| square_point(i, j)).collect();
    Lattice::from_points(LatticeKind::Sc, generation, &points)
}

/// Dual carpet: one site at the centre of every remaining carpet cell.
pub fn generate_dual_sierpinski_carpet(generation: u32) -> Result<Lattice> {
    check_range("dual carpet generation", generation, DSC_GENERATIONS)?;
    let points: Vec<_> = carpet_cells(generation)
        .into_iter()
        .map(|(j, i)| cell_point(i, j))
        .collect();
    Lattice::from_points(LatticeKind::Dsc, generation, &points)
}

/// Filled triangle of side `rows`: row `k` (from the apex) holds `k + 1` sites.
pub fn generate_triangle(rows: u32) -> Result<Lattice> {
    check_range("triangle rows", rows, REGULAR_SIZE)?;
    let r = rows as i64;
    let points: Vec<_> = (0..=r)
        .flat_map(|row| (0..=row).map(move |c| triangular_point(row, c)))
        .collect();
    Lattice::from_points(LatticeKind::Triangle, rows, &points)
}

/// Filled square vertex grid of `(side + 1)^2` sites.
pub fn generate_square(side: u32) -> Result<Lattice> {
    check_range("square side", side, REGULAR_SIZE)?;
    let s = side as i64;
    let points: Vec<_> = (0..=s)
        .flat_map(|j| (0..=s).map(move |i| square_point(i, j)))
        .collect();
    Lattice::from_points(LatticeKind::Square, side, &points)
}

/// Generates a lattice of the given kind; `size` is the generation for
/// fractals and rows/side for regular lattices.
pub fn generate(kind: LatticeKind, size: u32) -> Result<Lattice> {
    match kind {
        LatticeKind::Sg => generate_sierpinski_gasket(size),
        LatticeKind::Sc => generate_sierpinski_carpet(size),
        LatticeKind::Dsc => generate_dual_sierpinski_carpet(size),
        LatticeKind::Triangle => generate_triangle(size),
        LatticeKind::Square => generate_square(size),
        LatticeKind::Custom => Err(Error::Domain(
            "custom lattices are built from points".into(),
        )),
    }
}

/// Degree histogram: degree -> number of sites with that degree.
pub fn connectivity_histogram(lattice: &Lattice) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for d in lattice.degrees() {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

/// Named or explicit input site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSelector {
    /// Topmost site (gaskets, triangles).
    Apex,
    /// Top-left corner site (carpets, squares).
    TopLeft,
    /// The kind's canonical input.
    Canonical,
    Site(usize),
}

impl InputSelector {
    pub fn resolve(self, lattice: &Lattice) -> Result<usize> {
        match self {
            InputSelector::Apex | InputSelector::TopLeft | InputSelector::Canonical => {
                Ok(lattice.canonical_input())
            }
            InputSelector::Site(id) => lattice.site(id).map(|s| s.id),
        }
    }
}

impl FromStr for InputSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "apex" => Ok(InputSelector::Apex),
            "corner" | "top-left" => Ok(InputSelector::TopLeft),
            "canonical" => Ok(InputSelector::Canonical),
            other => other
                .strip_prefix("id:")
                .unwrap_or(other)
                .parse()
                .map(InputSelector::Site)
                .map_err(|_| Error::Malformed(format!("unknown input selector `{s}`"))),
        }
    }
}

/// Geometric landmarks of a fractal lattice seen from one input site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub input_site: usize,
    /// Sites abutting the nearest void that actually deletes sites.
    pub first_void_boundary: Vec<usize>,
    /// Filled-lattice positions removed by that void.
    pub first_void_positions: Vec<(f64, f64)>,
    /// Distance from the input to the nearest deleted position.
    pub probe_length_a: f64,
    pub farthest_set: Vec<usize>,
    pub farthest_distance: f64,
}

/// Positions of the filled lattice a fractal is carved from.
fn filled_positions(kind: LatticeKind, generation: u32) -> Result<Vec<(f64, f64)>> {
    Ok(match kind {
        LatticeKind::Sg => {
            let side = 1i64 << generation;
            (0..=side)
                .flat_map(|r| (0..=r).map(move |c| triangular_point(r, c)))
                .collect()
        }
        LatticeKind::Sc => {
            let side = 3i64.pow(generation);
            (0..=side)
                .flat_map(|j| (0..=side).map(move |i| square_point(i, j)))
                .collect()
        }
        LatticeKind::Dsc => {
            let side = 3i64.pow(generation);
            (0..side)
                .flat_map(|j| (0..side).map(move |i| cell_point(i, j)))
                .collect()
        }
        other => {
            return Err(Error::Structural(format!(
                "{other} lattice has no voids; landmarks need a fractal"
            )))
        }
    })
}

fn position_key((x, y): (f64, f64)) -> (i64, i64) {
    ((x * 1e6).round() as i64, (y * 1e6).round() as i64)
}

/// Groups positions into clusters connected by nearest-neighbour steps.
fn clusters(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let near = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1) <= 1.0 + EDGE_TOLERANCE;
    let mut label = vec![usize::MAX; points.len()];
    let mut out = Vec::new();
    for start in 0..points.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        label[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let p = points[members[cursor]];
            cursor += 1;
            for (j, &q) in points.iter().enumerate() {
                if label[j] == usize::MAX && near(p, q) {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        out.push(members);
    }
    out
}

/// Locates the first effective void and the farthest sites from `input_site`.
///
/// Voids that delete no site of the filled lattice (the unit holes of the
/// gasket and carpet) are invisible to the walker and are skipped.
pub fn landmark_sites(lattice: &Lattice, input_site: usize) -> Result<Landmarks> {
    let origin = *lattice.site(input_site)?;
    let present: HashSet<(i64, i64)> = lattice
        .sites()
        .iter()
        .map(|s| position_key((s.x, s.y)))
        .collect();
    let deleted: Vec<(f64, f64)> = filled_positions(lattice.kind(), lattice.generation())?
        .into_iter()
        .filter(|p| !present.contains(&position_key(*p)))
        .collect();
    if deleted.is_empty() {
        return Err(Error::Structural(format!(
            "no effective void in {} generation {}",
            lattice.kind(),
            lattice.generation()
        )));
    }

    let groups = clusters(&deleted);
    let group_distance = |g: &[usize]| {
        g.iter()
            .map(|&k| origin.distance_to(deleted[k]))
            .fold(f64::INFINITY, f64::min)
    };
    let nearest = groups
        .iter()
        .min_by(|a, b| {
            let (da, db) = (group_distance(a), group_distance(b));
            if (da - db).abs() <= DUPLICATE_TOLERANCE {
                a.len().cmp(&b.len())
            } else {
                da.total_cmp(&db)
            }
        })
        .ok_or_else(|| Error::Structural("void clustering produced no groups".into()))?;
    let probe_length_a = group_distance(nearest);
    let mut positions: Vec<(f64, f64)> = nearest.iter().map(|&k| deleted[k]).collect();
    positions.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));

    let first_void_boundary: Vec<usize> = lattice
        .sites()
        .iter()
        .filter(|s| {
            positions
                .iter()
                .any(|&p| s.distance_to(p) <= 1.0 + EDGE_TOLERANCE)
        })
        .map(|s| s.id)
        .collect();

    let (farthest_set, farthest_distance) = farthest_sites(lattice, input_site)?;
    Ok(Landmarks {
        input_site,
        first_void_boundary,
        first_void_positions: positions,
        probe_length_a,
        farthest_set,
        farthest_distance,
    })
}

/// All sites at maximal Euclidean distance from `input_site`, with that distance.
pub fn farthest_sites(lattice: &Lattice, input_site: usize) -> Result<(Vec<usize>, f64)> {
    let dist = lattice.distances_from(input_site)?;
    let max = dist.iter().copied().fold(0.0, f64::max);
    let set = dist
        .iter()
        .enumerate()
        .filter(|(_, &d)| max - d <= DUPLICATE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    Ok((set, max))
}

/// Sites at the largest hop count from `input_site`: the boundary facing the
/// input on a regular lattice (the bottom row of a triangle seen from its apex).
pub fn opposite_boundary(lattice: &Lattice, input_site: usize) -> Result<Vec<usize>> {
    let hops = lattice.hop_distances(input_site)?;
    let max = hops.iter().flatten().copied().max().unwrap_or(0);
    Ok(hops
        .iter()
        .enumerate()
        .filter(|(_, h)| **h == Some(max))
        .map(|(i, _)| i)
        .collect())
}

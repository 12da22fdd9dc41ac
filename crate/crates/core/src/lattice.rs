//! Lattice discretizations of the unit interval, the unit box and balls.
//!
//! A domain `D` is sampled at resolution `N` (spacing `h = 1/N`) as the set
//! `D_N = N·D̄ ∩ Z^d`. The interior `Λ_N` is the largest subset whose depth-`K`
//! boundary layer `∂_K Λ_N = {x ∉ Λ_N : dist(x, Λ_N) ≤ K}` stays inside
//! `D_N`, with `dist` the graph (L¹) distance of `Z^d`. Points lying exactly
//! on `∂(N·D)` belong to `D_N`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for deciding membership of lattice points in `D̄`.
const CLOSURE_EPS: f64 = 1e-12;

/// Continuum domain shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// The open interval `(0, 1)`.
    Interval,
    /// The open unit cube `(0, 1)^d`.
    UnitBox { dimension: usize },
    /// Open Euclidean ball.
    Ball {
        dimension: usize,
        radius: f64,
        center: Vec<f64>,
    },
}

impl DomainSpec {
    pub fn interval() -> Self {
        DomainSpec::Interval
    }

    pub fn unit_box(dimension: usize) -> Self {
        DomainSpec::UnitBox { dimension }
    }

    /// Ball of the given radius centred at the origin.
    pub fn ball(dimension: usize, radius: f64) -> Self {
        DomainSpec::Ball {
            dimension,
            radius,
            center: vec![0.0; dimension],
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Interval => 1,
            DomainSpec::UnitBox { dimension } | DomainSpec::Ball { dimension, .. } => *dimension,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Interval => Ok(()),
            DomainSpec::UnitBox { dimension } => {
                if *dimension == 0 {
                    return Err(Error::InvalidDomain("dimension must be >= 1".into()));
                }
                Ok(())
            }
            DomainSpec::Ball {
                dimension,
                radius,
                center,
            } => {
                if *dimension == 0 {
                    return Err(Error::InvalidDomain("dimension must be >= 1".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "radius must be > 0, got {radius}"
                    )));
                }
                if center.len() != *dimension {
                    return Err(Error::InvalidDomain(format!(
                        "center has {} coordinates, dimension is {dimension}",
                        center.len()
                    )));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidDomain("center must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Membership in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance_to_complement(x) > 0.0
    }

    /// Euclidean distance from `x` to `R^d \ D` (zero outside `D`).
    pub fn distance_to_complement(&self, x: &[f64]) -> f64 {
        match self {
            DomainSpec::Interval | DomainSpec::UnitBox { .. } => x
                .iter()
                .map(|&xi| xi.min(1.0 - xi))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            DomainSpec::Ball { radius, center, .. } => {
                let r = euclid(x, center);
                (radius - r).max(0.0)
            }
        }
    }

    /// Membership in the closure `D̄`, up to a rounding tolerance.
    pub fn contains_closure(&self, x: &[f64]) -> bool {
        match self {
            DomainSpec::Interval | DomainSpec::UnitBox { .. } => x
                .iter()
                .all(|&xi| xi >= -CLOSURE_EPS && xi <= 1.0 + CLOSURE_EPS),
            DomainSpec::Ball { radius, center, .. } => {
                euclid(x, center) <= radius * (1.0 + CLOSURE_EPS)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval => 1.0,
            DomainSpec::UnitBox { dimension } => (*dimension as f64).sqrt(),
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Lebesgue measure of `D`.
    pub fn volume(&self) -> f64 {
        match self {
            DomainSpec::Interval | DomainSpec::UnitBox { .. } => 1.0,
            DomainSpec::Ball {
                dimension, radius, ..
            } => unit_ball_volume(*dimension) * radius.powi(*dimension as i32),
        }
    }

    /// Axis-aligned bounding box `(lower, upper)` of `D̄`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Interval => (vec![0.0], vec![1.0]),
            DomainSpec::UnitBox { dimension } => (vec![0.0; *dimension], vec![1.0; *dimension]),
            DomainSpec::Ball { radius, center, .. } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_d = π^{d/2} / Γ(d/2 + 1), via V_d = 2π/d · V_{d-2}
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// L¹ graph distance between two nodes of `Z^d`.
pub fn graph_distance(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
}

/// An ordered list of lattice nodes of a fixed dimension, stored flat.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct NodeList {
    dim: usize,
    coords: Vec<i64>,
}

impl NodeList {
    fn new(dim: usize) -> Self {
        NodeList {
            dim,
            coords: Vec::new(),
        }
    }

    fn push(&mut self, node: &[i64]) {
        debug_assert_eq!(node.len(), self.dim);
        self.coords.extend_from_slice(node);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[i64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn contains(&self, node: &[i64]) -> bool {
        self.iter().any(|n| n == node)
    }
}

/// Dense row-major box of integer lattice points, used for masks and lookups.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GridBox {
    lower: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl GridBox {
    fn new(lower: Vec<i64>, upper: Vec<i64>) -> Self {
        let shape: Vec<usize> = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| (u - l + 1).max(0) as usize)
            .collect();
        let mut strides = vec![1usize; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        GridBox {
            lower,
            shape,
            strides,
        }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn flat(&self, node: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..node.len() {
            let off = node[k] - self.lower[k];
            if off < 0 || off as usize >= self.shape[k] {
                return None;
            }
            idx += off as usize * self.strides[k];
        }
        Some(idx)
    }

    fn node(&self, mut flat: usize, out: &mut [i64]) {
        for k in 0..self.shape.len() {
            let q = flat / self.strides[k];
            flat -= q * self.strides[k];
            out[k] = self.lower[k] + q as i64;
        }
    }

    /// One step of L¹ erosion: keep points whose 2d lattice neighbours are all set.
    fn erode(&self, mask: &[bool]) -> Vec<bool> {
        let d = self.shape.len();
        let mut out = vec![false; mask.len()];
        let mut node = vec![0i64; d];
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                continue;
            }
            self.node(i, &mut node);
            let mut keep = true;
            'axes: for k in 0..d {
                for step in [-1i64, 1] {
                    node[k] += step;
                    let inside = self.flat(&node).is_some_and(|j| mask[j]);
                    node[k] -= step;
                    if !inside {
                        keep = false;
                        break 'axes;
                    }
                }
            }
            out[i] = keep;
        }
        out
    }

    /// One step of L¹ dilation (restricted to the box).
    fn dilate(&self, mask: &[bool]) -> Vec<bool> {
        let d = self.shape.len();
        let mut out = mask.to_vec();
        let mut node = vec![0i64; d];
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                continue;
            }
            self.node(i, &mut node);
            for k in 0..d {
                for step in [-1i64, 1] {
                    node[k] += step;
                    if let Some(j) = self.flat(&node) {
                        out[j] = true;
                    }
                    node[k] -= step;
                }
            }
        }
        out
    }

    fn collect(&self, mask: &[bool]) -> NodeList {
        let mut list = NodeList::new(self.shape.len());
        let mut node = vec![0i64; self.shape.len()];
        for (i, &m) in mask.iter().enumerate() {
            if m {
                self.node(i, &mut node);
                list.push(&node);
            }
        }
        list
    }
}

/// Mask of `N·D̄ ∩ Z^d` over a box padded by one cell on every side.
fn closure_mask(spec: &DomainSpec, n: usize) -> (GridBox, Vec<bool>) {
    let (lo, hi) = spec.bounding_box();
    let nf = n as f64;
    let lower: Vec<i64> = lo.iter().map(|l| (l * nf).floor() as i64 - 1).collect();
    let upper: Vec<i64> = hi.iter().map(|u| (u * nf).ceil() as i64 + 1).collect();
    let grid = GridBox::new(lower, upper);
    let d = spec.dimension();
    let mut node = vec![0i64; d];
    let mut x = vec![0.0; d];
    let mask = (0..grid.len())
        .map(|i| {
            grid.node(i, &mut node);
            for k in 0..d {
                x[k] = node[k] as f64 / nf;
            }
            spec.contains_closure(&x)
        })
        .collect();
    (grid, mask)
}

fn erode_times(grid: &GridBox, mask: &[bool], times: usize) -> Vec<bool> {
    let mut m = mask.to_vec();
    for _ in 0..times {
        m = grid.erode(&m);
    }
    m
}

/// Lattice discretization of a domain: interior `Λ_N`, its depth-`K`
/// boundary layer, and a lexicographic index over the interior.
#[derive(Clone, Debug)]
pub struct LatticeDomain {
    spec: DomainSpec,
    n: usize,
    depth: usize,
    grid: GridBox,
    interior: NodeList,
    boundary_layer: NodeList,
    lookup: Vec<u32>,
}

const NO_INDEX: u32 = u32::MAX;

impl LatticeDomain {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension()
    }

    /// Resolution `N`.
    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Grid spacing `h = 1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Layer depth `K`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn interior(&self) -> &NodeList {
        &self.interior
    }

    pub fn boundary_layer(&self) -> &NodeList {
        &self.boundary_layer
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn node(&self, i: usize) -> &[i64] {
        self.interior.get(i)
    }

    /// Index of an interior node, or `None` for every other lattice point.
    pub fn index_of(&self, node: &[i64]) -> Option<usize> {
        if node.len() != self.dim() {
            return None;
        }
        match self.grid.flat(node).map(|j| self.lookup[j]) {
            Some(NO_INDEX) | None => None,
            Some(i) => Some(i as usize),
        }
    }

    /// Physical position `h·z` of interior node `i`.
    pub fn position(&self, i: usize) -> Vec<f64> {
        let h = self.h();
        self.node(i).iter().map(|&z| z as f64 * h).collect()
    }

    /// Interior node closest to the physical point `x`.
    pub fn nearest_interior(&self, x: &[f64]) -> Option<usize> {
        let nf = self.n as f64;
        (0..self.len()).min_by(|&a, &b| {
            let da: f64 = self
                .node(a)
                .iter()
                .zip(x)
                .map(|(&z, &y)| (z as f64 - y * nf).powi(2))
                .sum();
            let db: f64 = self
                .node(b)
                .iter()
                .zip(x)
                .map(|(&z, &y)| (z as f64 - y * nf).powi(2))
                .sum();
            da.total_cmp(&db)
        })
    }

    /// Write the node lists as CSV: coordinates `x0..x{d-1}` (physical) and a role column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_node_header(&mut w, self.dim())?;
        write_nodes(&mut w, &self.interior, self.h(), "interior")?;
        write_nodes(&mut w, &self.boundary_layer, self.h(), "boundary")?;
        Ok(())
    }
}

fn write_node_header<W: Write>(w: &mut W, d: usize) -> Result<()> {
    let cols: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
    writeln!(w, "{},role", cols.join(","))?;
    Ok(())
}

fn write_nodes<W: Write>(w: &mut W, list: &NodeList, h: f64, role: &str) -> Result<()> {
    for node in list.iter() {
        let xs: Vec<String> = node
            .iter()
            .map(|&z| format!("{:.17e}", z as f64 * h))
            .collect();
        writeln!(w, "{},{role}", xs.join(","))?;
    }
    Ok(())
}

/// Discretize `spec` at resolution `n` keeping a boundary layer of depth `depth`.
///
/// The interior is obtained by `depth` rounds of L¹ erosion of `N·D̄ ∩ Z^d`,
/// which yields the maximal set whose depth-`K` layer stays in `N·D̄`.
pub fn discretize(spec: &DomainSpec, n: usize, depth: usize) -> Result<LatticeDomain> {
    spec.validate()?;
    if depth == 0 {
        return Err(Error::InvalidArgument("layer depth K must be >= 1".into()));
    }
    if n < 4 * depth {
        return Err(Error::ResolutionTooCoarse {
            n,
            depth,
            min: 4 * depth,
        });
    }
    discretize_unchecked(spec, n, depth)
}

/// [`discretize`] without the `N ≥ 4K` resolution precondition.
pub(crate) fn discretize_unchecked(
    spec: &DomainSpec,
    n: usize,
    depth: usize,
) -> Result<LatticeDomain> {
    let (grid, closure) = closure_mask(spec, n);
    let interior_mask = erode_times(&grid, &closure, depth);
    let interior = grid.collect(&interior_mask);
    if interior.is_empty() {
        return Err(Error::EmptyInterior { n, depth });
    }
    if interior.len() >= NO_INDEX as usize {
        return Err(Error::InvalidArgument("too many interior nodes".into()));
    }

    let mut reach = interior_mask.clone();
    for _ in 0..depth {
        reach = grid.dilate(&reach);
    }
    let layer_mask: Vec<bool> = reach
        .iter()
        .zip(&interior_mask)
        .map(|(&r, &i)| r && !i)
        .collect();
    let boundary_layer = grid.collect(&layer_mask);

    let mut lookup = vec![NO_INDEX; grid.len()];
    let mut next = 0u32;
    for (slot, &m) in lookup.iter_mut().zip(&interior_mask) {
        if m {
            *slot = next;
            next += 1;
        }
    }

    Ok(LatticeDomain {
        spec: spec.clone(),
        n,
        depth,
        grid,
        interior,
        boundary_layer,
        lookup,
    })
}

/// Grid partition `D_h = R_h ⊎ B_h`, `R_h = R_h* ⊎ B_h*` used by the
/// finite-difference error analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct ThomeePartition {
    pub h: f64,
    pub depth: usize,
    pub d_h: NodeList,
    pub r_h: NodeList,
    pub b_h: NodeList,
    pub r_h_star: NodeList,
    pub b_h_star: NodeList,
}

impl ThomeePartition {
    /// CSV with roles `interior` (R_h*), `bstar` (B_h*) and `boundary` (B_h).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_node_header(&mut w, self.d_h.dim())?;
        write_nodes(&mut w, &self.r_h_star, self.h, "interior")?;
        write_nodes(&mut w, &self.b_h_star, self.h, "bstar")?;
        write_nodes(&mut w, &self.b_h, self.h, "boundary")?;
        Ok(())
    }
}

/// Resolution `N` with `h = 1/N`, rejecting spacings that are not reciprocals of integers.
pub fn resolution_from_spacing(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSpacing(h));
    }
    let n = (1.0 / h).round();
    if n < 1.0 || ((1.0 / h) - n).abs() > 1e-9 * n {
        return Err(Error::InvalidSpacing(h));
    }
    Ok(n as usize)
}

pub fn thomee_partition(spec: &DomainSpec, h: f64, depth: usize) -> Result<ThomeePartition> {
    spec.validate()?;
    if depth == 0 {
        return Err(Error::InvalidArgument("layer depth K must be >= 1".into()));
    }
    let n = resolution_from_spacing(h)?;
    if h > spec.diameter() / (4 * depth) as f64 + 1e-15 {
        return Err(Error::EmptyInterior { n, depth });
    }
    let (grid, closure) = closure_mask(spec, n);
    let r = erode_times(&grid, &closure, depth);
    let r_star = erode_times(&grid, &r, depth);
    let r_h = grid.collect(&r);
    if r_h.is_empty() {
        return Err(Error::EmptyInterior { n, depth });
    }
    let minus =
        |a: &[bool], b: &[bool]| -> Vec<bool> { a.iter().zip(b).map(|(&x, &y)| x && !y).collect() };
    Ok(ThomeePartition {
        h: 1.0 / n as f64,
        depth,
        d_h: grid.collect(&closure),
        b_h: grid.collect(&minus(&closure, &r)),
        b_h_star: grid.collect(&minus(&r, &r_star)),
        r_h_star: grid.collect(&r_star),
        r_h,
    })
}

/// Write CSV to `path` atomically (temporary file in the same directory, then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

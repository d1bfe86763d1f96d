//! Point sets on the unit sphere S^d and exact-degree quadrature rules on S^2.
//!
//! Everything in this crate integrates against the normalized uniform measure
//! sigma (total mass 1). Quadrature weights therefore sum to 1 and sampling is
//! uniform with respect to sigma.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// How a point set was produced. Loaded design files can declare their
/// provenance through [`load_points_as`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Random,
    Spiral,
    TDesign,
    MaxDeterminant,
    Loaded,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PointKind::Random => "random",
            PointKind::Spiral => "spiral",
            PointKind::TDesign => "t-design",
            PointKind::MaxDeterminant => "max-determinant",
            PointKind::Loaded => "loaded",
        };
        f.write_str(s)
    }
}

/// A finite set of unit vectors on S^d, stored as flat coordinates in
/// R^{d+1} (stride `dim + 1`).
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    kind: PointKind,
    seed: Option<u64>,
}

impl PointSet {
    fn from_coords(dim: usize, coords: Vec<f64>, kind: PointKind, seed: Option<u64>) -> Self {
        debug_assert!(coords.len() % (dim + 1) == 0);
        PointSet {
            dim,
            coords,
            kind,
            seed,
        }
    }

    /// Builds a point set on S^2 from Cartesian unit vectors. Each point is
    /// renormalized; norms off by more than 1e-6 are rejected.
    pub fn from_xyz(pts: &[[f64; 3]], kind: PointKind) -> Result<Self> {
        if pts.is_empty() {
            return Err(Error::invalid("from_xyz: empty point list"));
        }
        let mut coords = Vec::with_capacity(3 * pts.len());
        for (i, p) in pts.iter().enumerate() {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "from_xyz: point {i} has norm {norm}"
                )));
            }
            coords.extend_from_slice(&[p[0] / norm, p[1] / norm, p[2] / norm]);
        }
        Ok(PointSet::from_coords(2, coords, kind, None))
    }

    /// Sphere dimension d (points live in R^{d+1}).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Coordinates of point `i` as a slice of length `dim + 1`.
    pub fn point(&self, i: usize) -> &[f64] {
        let s = self.dim + 1;
        &self.coords[i * s..(i + 1) * s]
    }

    /// Point `i` on S^2 as a fixed-size array. Panics if `dim != 2`.
    pub fn xyz(&self, i: usize) -> [f64; 3] {
        assert_eq!(self.dim, 2, "xyz() requires points on S^2");
        let p = self.point(i);
        [p[0], p[1], p[2]]
    }

    /// All points on S^2 as arrays. Panics if `dim != 2`.
    pub fn to_xyz(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.xyz(i)).collect()
    }
}

/// n i.i.d. uniform points on S^d, generated by normalizing standard Gaussian
/// vectors. Deterministic for a fixed seed.
pub fn random_points(n: usize, d: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("random_points: n must be >= 1"));
    }
    if d == 0 {
        return Err(Error::invalid("random_points: d must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = d + 1;
    let mut coords = Vec::with_capacity(n * stride);
    let mut buf = vec![0.0f64; stride];
    for _ in 0..n {
        loop {
            let mut norm2 = 0.0;
            for b in buf.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *b = g;
                norm2 += g * g;
            }
            // A zero vector is astronomically unlikely but would not normalize.
            if norm2 > 1e-24 {
                let inv = 1.0 / norm2.sqrt();
                coords.extend(buf.iter().map(|&v| v * inv));
                break;
            }
        }
    }
    Ok(PointSet::from_coords(d, coords, PointKind::Random, Some(seed)))
}

/// Generalized spiral points on S^2: z_j = 1 - (2j-1)/n, phi_j = 1.8 sqrt(n) theta_j mod 2 pi.
pub fn spiral_points(n: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("spiral_points: n must be >= 1"));
    }
    let nf = n as f64;
    let c = 1.8 * nf.sqrt();
    let mut coords = Vec::with_capacity(3 * n);
    for j in 1..=n {
        let z = 1.0 - (2.0 * j as f64 - 1.0) / nf;
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = (c * theta) % (2.0 * PI);
        let s = theta.sin();
        coords.push(s * phi.cos());
        coords.push(s * phi.sin());
        coords.push(z);
    }
    Ok(PointSet::from_coords(2, coords, PointKind::Spiral, None))
}

/// Cardinality of a symmetric spherical t-design in the published series,
/// N = 2 (ceil(t(t+1)/4) + 1).
pub fn t_design_cardinality(t: usize) -> usize {
    2 * ((t * (t + 1)).div_ceil(4) + 1)
}

/// Loads points from an ASCII file: one point per line as three
/// whitespace-separated floats, `#`-prefixed comment lines ignored.
/// Rows must have unit norm within 1e-6 and are renormalized exactly.
pub fn load_points(path: impl AsRef<Path>) -> Result<PointSet> {
    load_points_as(path, PointKind::Loaded)
}

/// Same as [`load_points`] but records a declared provenance, for files known
/// to be t-designs or max-determinant sets.
pub fn load_points_as(path: impl AsRef<Path>, kind: PointKind) -> Result<PointSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut coords = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::PointFile {
                path: pstr,
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut p = [0.0f64; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f.parse::<f64>().map_err(|e| Error::PointFile {
                path: pstr.clone(),
                line: line_no,
                reason: format!("bad float `{f}`: {e}"),
            })?;
        }
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::PointFile {
                path: pstr,
                line: line_no,
                reason: format!("row norm {norm:.9} deviates from 1 by more than 1e-6"),
            });
        }
        coords.push(p[0] / norm);
        coords.push(p[1] / norm);
        coords.push(p[2] / norm);
    }
    if coords.is_empty() {
        return Err(Error::PointFile {
            path: pstr,
            line: 0,
            reason: "file contains no points".into(),
        });
    }
    Ok(PointSet::from_coords(2, coords, kind, None))
}

/// Writes a point set in the same ASCII format the loader accepts.
pub fn save_points(path: impl AsRef<Path>, pts: &PointSet) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# {} points, kind: {}", pts.len(), pts.kind())?;
    for i in 0..pts.len() {
        let p = pts.point(i);
        writeln!(f, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    Ok(())
}

/// Geodesic distance on the unit sphere, arccos of the dot product clamped
/// to [-1, 1].
pub fn geodesic(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Upper-biased estimate of the fill distance of `x`: the maximum over
/// `probe` points of the geodesic distance to the nearest point of `x`.
/// The probe set should be dense, around 20x the size of `x`.
pub fn fill_distance(x: &PointSet, probe: &PointSet) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("fill_distance: empty point set"));
    }
    if x.dim() != 2 || probe.dim() != 2 {
        return Err(Error::invalid("fill_distance: S^2 only"));
    }
    let sites = x.to_xyz();
    let buckets = CapBuckets::build(&sites, 8.0);
    let mut h: f64 = 0.0;
    for i in 0..probe.len() {
        let (_, d) = buckets.nearest_geodesic(probe.xyz(i));
        h = h.max(d);
    }
    Ok(h)
}

/// Half the minimum pairwise geodesic distance of `x`.
pub fn separation_distance(x: &PointSet) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("separation_distance: need at least 2 points"));
    }
    if x.dim() != 2 {
        return Err(Error::invalid("separation_distance: S^2 only"));
    }
    let sites = x.to_xyz();
    let n = sites.len();
    let mut min_d = f64::INFINITY;
    if n <= 2048 {
        for i in 0..n {
            for j in (i + 1)..n {
                let d = geodesic(&sites[i], &sites[j]);
                if d < min_d {
                    min_d = d;
                }
            }
        }
    } else {
        let buckets = CapBuckets::build(&sites, 8.0);
        for (i, p) in sites.iter().enumerate() {
            let d = buckets.nearest_geodesic_excluding(*p, i);
            if d < min_d {
                min_d = d;
            }
        }
    }
    Ok(0.5 * min_d)
}

/// Gauss-Legendre nodes and weights on [-1, 1]. Nodes are returned in
/// increasing order; weights sum to 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre: n must be >= 1");
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root from the top.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, d) = legendre_value_deriv(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // Derivative refresh at the converged node for the weight formula.
        let (_, dp) = legendre_value_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Value and derivative of the classical Legendre polynomial P_n at x.
fn legendre_value_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1)
    let d = if (x * x - 1.0).abs() < 1e-300 {
        0.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// A quadrature rule on S^2 with weights summing to 1 under the normalized
/// measure, exact for all spherical polynomials up to `exact_degree`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` against the rule.
    pub fn integrate(&self, mut f: impl FnMut(&[f64; 3]) -> f64) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (x, &w) in self.nodes.iter().zip(&self.weights) {
            let term = w * f(x);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }
}

/// Tensor-product rule on S^2 kept in structured (ring) form: Gauss-Legendre
/// in z = cos(theta), equispaced in longitude. Rings are materialized lazily,
/// so degree-several-thousand rules stay cheap to hold.
#[derive(Debug, Clone)]
pub struct ProductRule {
    pub exact_degree: usize,
    /// z-coordinates of the rings, increasing.
    pub z_nodes: Vec<f64>,
    /// Gauss-Legendre weights of the rings (sum 2).
    pub z_weights: Vec<f64>,
    /// Number of equispaced longitudes per ring, phi_i = 2 pi i / n_phi.
    pub n_phi: usize,
}

impl ProductRule {
    pub fn new(degree: usize) -> Self {
        let n_z = (degree + 1).div_ceil(2);
        let n_phi = degree + 1;
        let (z_nodes, z_weights) = gauss_legendre(n_z);
        ProductRule {
            exact_degree: degree,
            z_nodes,
            z_weights,
            n_phi,
        }
    }

    pub fn len(&self) -> usize {
        self.z_nodes.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Normalized weight of any node on ring `r` (all nodes of a ring share it).
    pub fn ring_weight(&self, r: usize) -> f64 {
        self.z_weights[r] / (2.0 * self.n_phi as f64)
    }

    /// Cartesian coordinates of node `(r, i)`.
    pub fn node(&self, r: usize, i: usize) -> [f64; 3] {
        let z = self.z_nodes[r];
        let s = (1.0 - z * z).max(0.0).sqrt();
        let phi = 2.0 * PI * i as f64 / self.n_phi as f64;
        [s * phi.cos(), s * phi.sin(), z]
    }

    /// Flattens to an explicit node/weight list.
    pub fn flatten(&self) -> QuadratureRule {
        let mut nodes = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for r in 0..self.z_nodes.len() {
            let w = self.ring_weight(r);
            for i in 0..self.n_phi {
                nodes.push(self.node(r, i));
                weights.push(w);
            }
        }
        QuadratureRule {
            nodes,
            weights,
            exact_degree: self.exact_degree,
        }
    }
}

/// Product Gauss-Legendre x equispaced-longitude rule, exact for spherical
/// polynomials of degree <= `degree`, weights summing to 1.
pub fn product_quadrature(degree: usize) -> QuadratureRule {
    ProductRule::new(degree).flatten()
}

/// Spherical-cap bucketing of a point list: latitude bands crossed with
/// longitude sectors. Queries return index supersets of all points within a
/// chordal radius, which callers filter exactly.
#[derive(Debug, Clone)]
pub struct CapBuckets {
    n_bands: usize,
    n_sectors: usize,
    cells: Vec<Vec<u32>>,
    pts: Vec<[f64; 3]>,
    /// Expected nearest-neighbor spacing, used to seed nearest() searches.
    spacing: f64,
}

impl CapBuckets {
    /// Builds buckets sized so an average cell holds about `target_per_cell`
    /// points.
    pub fn build(pts: &[[f64; 3]], target_per_cell: f64) -> Self {
        assert!(!pts.is_empty());
        let n = pts.len() as f64;
        let cells_wanted = (n / target_per_cell.max(1.0)).max(1.0);
        // Aspect ratio 1:2 (bands:sectors) roughly equalizes cell extents.
        let n_bands = ((cells_wanted / 2.0).sqrt().ceil() as usize).clamp(1, 512);
        let n_sectors = (2 * n_bands).max(1);
        let mut cells = vec![Vec::new(); n_bands * n_sectors];
        for (i, p) in pts.iter().enumerate() {
            let (b, s) = Self::cell_of(p, n_bands, n_sectors);
            cells[b * n_sectors + s].push(i as u32);
        }
        let spacing = 2.0 / n.sqrt();
        CapBuckets {
            n_bands,
            n_sectors,
            cells,
            pts: pts.to_vec(),
            spacing,
        }
    }

    /// Builds buckets whose band height is approximately `band_height` in
    /// geodesic units, as used by the compact-kernel evaluation fast path.
    pub fn build_with_band_height(pts: &[[f64; 3]], band_height: f64) -> Self {
        assert!(!pts.is_empty());
        let n_bands = ((PI / band_height.max(1e-3)).ceil() as usize).clamp(1, 2048);
        let n_sectors = (2 * n_bands).max(1);
        let mut cells = vec![Vec::new(); n_bands * n_sectors];
        for (i, p) in pts.iter().enumerate() {
            let (b, s) = Self::cell_of(p, n_bands, n_sectors);
            cells[b * n_sectors + s].push(i as u32);
        }
        let spacing = 2.0 / (pts.len() as f64).sqrt();
        CapBuckets {
            n_bands,
            n_sectors,
            cells,
            pts: pts.to_vec(),
            spacing,
        }
    }

    fn cell_of(p: &[f64; 3], n_bands: usize, n_sectors: usize) -> (usize, usize) {
        let theta = p[2].clamp(-1.0, 1.0).acos();
        let b = ((theta / PI) * n_bands as f64) as usize;
        let b = b.min(n_bands - 1);
        let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
        let s = ((phi / (2.0 * PI)) * n_sectors as f64) as usize;
        let s = s.min(n_sectors - 1);
        (b, s)
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Pushes into `out` the indices of a superset of all points whose chordal
    /// distance to `x` is at most `chord`.
    pub fn within_chord(&self, x: [f64; 3], chord: f64, out: &mut Vec<u32>) {
        out.clear();
        if chord >= 2.0 {
            for cell in &self.cells {
                out.extend_from_slice(cell);
            }
            return;
        }
        let gamma = 2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin();
        let theta_x = x[2].clamp(-1.0, 1.0).acos();
        // Colatitude range of the cap, padded by one band on each side.
        let t_lo = (theta_x - gamma).max(0.0);
        let t_hi = (theta_x + gamma).min(PI);
        let band_h = PI / self.n_bands as f64;
        let b_lo = ((t_lo / band_h) as usize).saturating_sub(1);
        let b_hi = (((t_hi / band_h) as usize) + 1).min(self.n_bands - 1);
        // Longitude extent of the cap. If the cap reaches a pole every sector
        // can contain members.
        let full_phi = gamma >= theta_x || gamma >= PI - theta_x;
        if full_phi {
            for b in b_lo..=b_hi {
                for s in 0..self.n_sectors {
                    out.extend_from_slice(&self.cells[b * self.n_sectors + s]);
                }
            }
            return;
        }
        let sin_t = theta_x.sin();
        let ratio = (gamma.sin() / sin_t).min(1.0);
        let dphi = ratio.asin();
        let phi_x = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        let sector_w = 2.0 * PI / self.n_sectors as f64;
        let span = (dphi / sector_w) as isize + 1;
        let s_center = (phi_x / sector_w) as isize;
        for b in b_lo..=b_hi {
            for ds in -span..=span {
                let s = (s_center + ds).rem_euclid(self.n_sectors as isize) as usize;
                out.extend_from_slice(&self.cells[b * self.n_sectors + s]);
            }
        }
        // Wrapped spans can visit a sector twice on tiny sector counts; the
        // caller-side exact distance filter tolerates duplicates, but nearest
        // queries do not care either.
    }

    /// Index and geodesic distance of the nearest stored point to `x`.
    pub fn nearest_geodesic(&self, x: [f64; 3]) -> (usize, f64) {
        self.nearest_impl(x, usize::MAX)
    }

    /// Nearest distance excluding one index (for separation scans).
    pub fn nearest_geodesic_excluding(&self, x: [f64; 3], skip: usize) -> f64 {
        self.nearest_impl(x, skip).1
    }

    fn nearest_impl(&self, x: [f64; 3], skip: usize) -> (usize, f64) {
        let mut radius = (2.0 * self.spacing).min(2.0);
        let mut cand = Vec::new();
        loop {
            self.within_chord(x, radius, &mut cand);
            let mut best = usize::MAX;
            let mut best_c2 = f64::INFINITY;
            for &i in &cand {
                let i = i as usize;
                if i == skip {
                    continue;
                }
                let p = &self.pts[i];
                let dx = p[0] - x[0];
                let dy = p[1] - x[1];
                let dz = p[2] - x[2];
                let c2 = dx * dx + dy * dy + dz * dz;
                if c2 < best_c2 {
                    best_c2 = c2;
                    best = i;
                }
            }
            if best != usize::MAX && best_c2.sqrt() <= radius {
                let chord = best_c2.sqrt();
                let geo = 2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin();
                return (best, geo);
            }
            if radius >= 2.0 {
                // Entire sphere scanned; return whatever was found.
                if best != usize::MAX {
                    let chord = best_c2.sqrt();
                    let geo = 2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin();
                    return (best, geo);
                }
                panic!("nearest_impl: no candidate on full-sphere scan");
            }
            radius = (radius * 2.0).min(2.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(p: &[f64]) -> f64 {
        p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn random_points_are_unit_and_deterministic() {
        let a = random_points(100, 2, 42).unwrap();
        let b = random_points(100, 2, 42).unwrap();
        assert_eq!(a.len(), 100);
        for i in 0..a.len() {
            assert!((norm(a.point(i)) - 1.0).abs() < 1e-12);
            assert_eq!(a.point(i), b.point(i));
        }
        let c = random_points(100, 2, 43).unwrap();
        assert_ne!(a.point(0), c.point(0));
    }

    #[test]
    fn random_points_higher_dim() {
        let a = random_points(50, 3, 7).unwrap();
        assert_eq!(a.dim(), 3);
        assert_eq!(a.point(0).len(), 4);
        for i in 0..a.len() {
            assert!((norm(a.point(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_points_mean_vector_shrinks() {
        let a = random_points(100_000, 2, 1).unwrap();
        let mut mean = [0.0f64; 3];
        for i in 0..a.len() {
            let p = a.xyz(i);
            mean[0] += p[0];
            mean[1] += p[1];
            mean[2] += p[2];
        }
        for m in mean.iter_mut() {
            *m /= a.len() as f64;
        }
        assert!(norm(&mean) < 0.02, "mean norm {}", norm(&mean));
    }

    #[test]
    fn random_points_rejects_zero() {
        assert!(random_points(0, 2, 0).is_err());
    }

    #[test]
    fn spiral_matches_direct_formula() {
        // n = 1: z = 0, theta = pi/2, phi = 1.8 * pi/2.
        let s1 = spiral_points(1).unwrap();
        let phi = 1.8 * PI / 2.0;
        assert!((phi - 2.827_433_388_230_814).abs() < 1e-12);
        let p = s1.xyz(0);
        assert!((p[0] - phi.cos()).abs() < 1e-15);
        assert!((p[1] - phi.sin()).abs() < 1e-15);
        assert!(p[2].abs() < 1e-15);

        // n = 2: z_1 = 0.5, theta_1 = pi/3, phi_1 = 1.8 sqrt(2) pi/3 mod 2 pi.
        let s2 = spiral_points(2).unwrap();
        let p = s2.xyz(0);
        assert!((p[2] - 0.5).abs() < 1e-15);
        let phi1 = (1.8 * 2.0f64.sqrt() * (PI / 3.0)) % (2.0 * PI);
        assert!((phi1 - 2.665_729_762_895_020).abs() < 1e-12);
        assert!((p[0] - (PI / 3.0).sin() * phi1.cos()).abs() < 1e-14);
    }

    #[test]
    fn spiral_z_strictly_decreasing() {
        let s = spiral_points(257).unwrap();
        for i in 1..s.len() {
            assert!(s.xyz(i)[2] < s.xyz(i - 1)[2]);
            assert!(s.xyz(i)[2].abs() <= 1.0);
        }
    }

    #[test]
    fn t_design_cardinality_series() {
        assert_eq!(t_design_cardinality(51), 1328);
    }

    #[test]
    fn loader_roundtrip_and_errors() {
        let dir = std::env::temp_dir();
        let ok = dir.join("skqi_pts_ok.txt");
        std::fs::write(&ok, "# comment\n0 0 1\n").unwrap();
        let p = load_points(&ok).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.xyz(0), [0.0, 0.0, 1.0]);
        assert_eq!(p.kind(), PointKind::Loaded);

        let bad_norm = dir.join("skqi_pts_badnorm.txt");
        std::fs::write(&bad_norm, "0 0 1\n0 0 2\n").unwrap();
        let err = load_points(&bad_norm).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "error should cite line 2, got: {msg}");

        let bad_field = dir.join("skqi_pts_badfield.txt");
        std::fs::write(&bad_field, "0 0 1\n0 0\n").unwrap();
        let err = load_points(&bad_field).unwrap_err();
        assert!(err.to_string().contains("expected 3 fields"));

        let renorm = dir.join("skqi_pts_renorm.txt");
        std::fs::write(&renorm, "1.0000004 0 0\n").unwrap();
        let p = load_points(&renorm).unwrap();
        assert!((norm(p.point(0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn loader_handles_crlf_and_save_roundtrip() {
        let dir = std::env::temp_dir();
        let crlf = dir.join("skqi_pts_crlf.txt");
        std::fs::write(&crlf, "0 0 1\r\n1 0 0  \r\n").unwrap();
        let p = load_points(&crlf).unwrap();
        assert_eq!(p.len(), 2);

        let saved = dir.join("skqi_pts_saved.txt");
        let orig = spiral_points(37).unwrap();
        save_points(&saved, &orig).unwrap();
        let back = load_points(&saved).unwrap();
        assert_eq!(back.len(), 37);
        for i in 0..37 {
            for k in 0..3 {
                assert!((back.xyz(i)[k] - orig.xyz(i)[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fill_distance_antipodal_and_zero() {
        let north = load_from_rows(&[[0.0, 0.0, 1.0]]);
        let south = load_from_rows(&[[0.0, 0.0, -1.0]]);
        let h = fill_distance(&north, &south).unwrap();
        assert!((h - PI).abs() < 1e-12);
        let same = spiral_points(50).unwrap();
        let h0 = fill_distance(&same, &same).unwrap();
        assert!(h0 < 1e-12);
    }

    #[test]
    fn fill_distance_spiral_brute_force_cross_check() {
        let x = spiral_points(400).unwrap();
        let probe = random_points(8000, 2, 9).unwrap();
        let fast = fill_distance(&x, &probe).unwrap();
        // Brute-force scan.
        let mut brute: f64 = 0.0;
        for i in 0..probe.len() {
            let mut best = f64::INFINITY;
            for j in 0..x.len() {
                let d = geodesic(&probe.xyz(i), &x.xyz(j));
                if d < best {
                    best = d;
                }
            }
            brute = brute.max(best);
        }
        assert!(
            (fast - brute).abs() < 1e-12,
            "bucketed {fast} vs brute {brute}"
        );
        // Spiral fill distance sits near 2/sqrt(N).
        let nominal = (400.0f64).powf(-0.5);
        assert!(fast > 0.5 * nominal && fast < 2.0 * (2.0 * nominal));
    }

    #[test]
    fn separation_matches_brute_force() {
        let x = spiral_points(100).unwrap();
        let q = separation_distance(&x).unwrap();
        let mut min_d = f64::INFINITY;
        for i in 0..100 {
            for j in (i + 1)..100 {
                min_d = min_d.min(geodesic(&x.xyz(i), &x.xyz(j)));
            }
        }
        assert!((q - 0.5 * min_d).abs() < 1e-14);
    }

    #[test]
    fn separation_bucketed_path_matches_brute_force() {
        let x = random_points(3000, 2, 11).unwrap();
        let q = separation_distance(&x).unwrap();
        let mut min_d = f64::INFINITY;
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                min_d = min_d.min(geodesic(&x.xyz(i), &x.xyz(j)));
            }
        }
        assert!((q - 0.5 * min_d).abs() < 1e-13);
    }

    #[test]
    fn separation_special_cases() {
        let anti = load_from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]);
        assert!((separation_distance(&anti).unwrap() - PI / 2.0).abs() < 1e-14);
        let dup = load_from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        assert!(separation_distance(&dup).unwrap() < 1e-12);
        let single = load_from_rows(&[[0.0, 0.0, 1.0]]);
        assert!(separation_distance(&single).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Exact through degree 11: check x^10 -> 2/11.
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(10)).sum();
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        // Odd powers vanish.
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(7)).sum();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_large_n_is_sane() {
        let (x, w) = gauss_legendre(2001);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-11);
        for i in 1..x.len() {
            assert!(x[i] > x[i - 1]);
        }
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn product_rule_weight_normalization() {
        let q = product_quadrature(0);
        assert_eq!(q.len(), 1);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = product_quadrature(10);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.weights.iter().all(|&w| w > 0.0));
        for n in &q.nodes {
            assert!((norm(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_rule_structured_matches_flat() {
        let pr = ProductRule::new(8);
        let flat = pr.flatten();
        let mut k = 0;
        for r in 0..pr.z_nodes.len() {
            for i in 0..pr.n_phi {
                let n = pr.node(r, i);
                assert_eq!(flat.nodes[k], n);
                assert!((flat.weights[k] - pr.ring_weight(r)).abs() < 1e-18);
                k += 1;
            }
        }
    }

    #[test]
    fn bucket_query_is_superset_of_brute_force() {
        let pts = random_points(2000, 2, 5).unwrap().to_xyz();
        let buckets = CapBuckets::build(&pts, 8.0);
        let queries = random_points(50, 2, 6).unwrap();
        let mut cand = Vec::new();
        for qi in 0..queries.len() {
            let x = queries.xyz(qi);
            for &chord in &[0.05, 0.2, 0.7, 1.5] {
                buckets.within_chord(x, chord, &mut cand);
                let set: std::collections::HashSet<u32> = cand.iter().copied().collect();
                for (j, p) in pts.iter().enumerate() {
                    let dx = p[0] - x[0];
                    let dy = p[1] - x[1];
                    let dz = p[2] - x[2];
                    let c = (dx * dx + dy * dy + dz * dz).sqrt();
                    if c <= chord {
                        assert!(
                            set.contains(&(j as u32)),
                            "missed point at chord {c} for query radius {chord}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn bucket_nearest_matches_brute_force() {
        let pts = spiral_points(1500).unwrap().to_xyz();
        let buckets = CapBuckets::build(&pts, 8.0);
        let queries = random_points(200, 2, 12).unwrap();
        for qi in 0..queries.len() {
            let x = queries.xyz(qi);
            let (bi, bd) = buckets.nearest_geodesic(x);
            let mut best = f64::INFINITY;
            let mut best_j = 0;
            for (j, p) in pts.iter().enumerate() {
                let d = geodesic(&x, p);
                if d < best {
                    best = d;
                    best_j = j;
                }
            }
            assert_eq!(bi, best_j);
            assert!((bd - best).abs() < 1e-12);
        }
    }

    fn load_from_rows(rows: &[[f64; 3]]) -> PointSet {
        let mut coords = Vec::new();
        for r in rows {
            coords.extend_from_slice(r);
        }
        PointSet::from_coords(2, coords, PointKind::Loaded, None)
    }
}

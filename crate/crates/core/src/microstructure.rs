//! Initial microstructures: periodic Voronoi tessellations of random seeds
//! on the torus `[0, 2)²`, and normally distributed grain orientations.

use std::collections::{HashMap, HashSet};

use delaunator::{next_halfedge, triangulate, Point, EMPTY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::network_sim::{EdgeSpec, GrainNetwork, DOMAIN};
use crate::vec2::Vec2;

/// Orientations are clamped to `±π/8` so every misorientation lies in `[−π/4, π/4]`.
pub const ORIENTATION_CLAMP: f64 = std::f64::consts::FRAC_PI_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub n_grains: usize,
    pub orientation_std: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { n_grains: 10_000, orientation_std: 0.1, seed: 0 }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grains < 3 {
            return Err(Error::InvalidArgument(format!("n_grains must be at least 3, got {}", self.n_grains)));
        }
        if !(self.orientation_std > 0.0 && self.orientation_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("orientation_std must be positive, got {}", self.orientation_std)));
        }
        Ok(())
    }
}

type Image = (usize, i32, i32);

/// Translation-invariant key for a set of periodic images.
fn canonical<const K: usize>(mut v: [Image; K]) -> [Image; K] {
    let mut best: Option<[Image; K]> = None;
    for a in 0..K {
        let (_, ax, ay) = v[a];
        let mut s = v;
        for x in s.iter_mut() {
            x.1 -= ax;
            x.2 -= ay;
        }
        s.sort_unstable();
        if best.is_none_or(|b| s < b) {
            best = Some(s);
        }
    }
    v = best.unwrap_or(v);
    v
}

fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    Vec2::new(a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d)
}

fn wrap(p: Vec2) -> Vec2 {
    Vec2::new(p.x.rem_euclid(DOMAIN), p.y.rem_euclid(DOMAIN))
}

/// Periodic Voronoi network of `seeds` (all orientations zero). Grain `i`
/// is the cell of seed `i`.
pub fn periodic_voronoi(seeds: &[Vec2]) -> Result<GrainNetwork> {
    let n = seeds.len();
    if n < 3 {
        return Err(Error::InvalidArgument("need at least 3 seeds".into()));
    }
    let k: i32 = if n < 50 { 2 } else { 1 };
    let mut pts = Vec::with_capacity(n * ((2 * k + 1) * (2 * k + 1)) as usize);
    let mut meta: Vec<Image> = Vec::with_capacity(pts.capacity());
    for sx in -k..=k {
        for sy in -k..=k {
            for (i, s) in seeds.iter().enumerate() {
                pts.push(Point { x: s.x + DOMAIN * sx as f64, y: s.y + DOMAIN * sy as f64 });
                meta.push((i, sx, sy));
            }
        }
    }
    let tri = triangulate(&pts);
    let at = |i: usize| Vec2::new(pts[i].x, pts[i].y);
    let central = |i: usize| meta[i].1 == 0 && meta[i].2 == 0;

    let n_tri = tri.triangles.len() / 3;
    let mut jid = vec![usize::MAX; n_tri];
    let mut cc = vec![Vec2::ZERO; n_tri];
    let mut keys: HashMap<[Image; 3], usize> = HashMap::new();
    let mut positions = Vec::with_capacity(2 * n);
    for t in 0..n_tri {
        let v = [tri.triangles[3 * t], tri.triangles[3 * t + 1], tri.triangles[3 * t + 2]];
        if !v.iter().any(|&i| central(i)) {
            continue;
        }
        cc[t] = circumcenter(at(v[0]), at(v[1]), at(v[2]));
        let key = canonical([meta[v[0]], meta[v[1]], meta[v[2]]]);
        let next = keys.len();
        let id = *keys.entry(key).or_insert(next);
        if id == next {
            positions.push(wrap(cc[t]));
        }
        jid[t] = id;
    }

    let mut seen: HashSet<[Image; 2]> = HashSet::new();
    let mut edges = Vec::with_capacity(3 * n);
    for e in 0..tri.triangles.len() {
        let twin = tri.halfedges[e];
        if twin == EMPTY {
            continue;
        }
        let p = tri.triangles[e];
        let q = tri.triangles[next_halfedge(e)];
        if !(central(p) || central(q)) {
            continue;
        }
        if !seen.insert(canonical([meta[p], meta[q]])) {
            continue;
        }
        let (t1, t2) = (e / 3, twin / 3);
        if jid[t1] == usize::MAX || jid[t2] == usize::MAX {
            return Err(Error::InvalidNetwork("Voronoi edge touches an unresolved triangle".into()));
        }
        let (gp, gq) = (meta[p].0, meta[q].0);
        if gp == gq {
            return Err(Error::InvalidNetwork(format!("cell {gp} borders itself")));
        }
        if jid[t1] == jid[t2] {
            return Err(Error::InvalidNetwork("degenerate Voronoi vertex".into()));
        }
        edges.push(EdgeSpec { ends: [jid[t1], jid[t2]], vector: cc[t2] - cc[t1], grains: [gp, gq] });
    }
    if positions.len() != 2 * n || edges.len() != 3 * n {
        return Err(Error::InvalidNetwork(format!(
            "periodic Voronoi has V={} E={} for N={n}",
            positions.len(),
            edges.len()
        )));
    }
    let net = GrainNetwork::from_parts(&positions, &[], &edges, &vec![0.0; n])?;
    net.validate()?;
    let floor = 1e-9 * net.mean_length();
    if net.boundary_ids().any(|b| net.length(b) <= floor) {
        return Err(Error::InvalidNetwork("near-degenerate Voronoi vertex".into()));
    }
    Ok(net)
}

/// I.i.d. `Normal(0, std)` orientations clamped to `±π/8`.
pub fn sample_orientations(cfg: &GeneratorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let normal = Normal::new(0.0, cfg.orientation_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..cfg.n_grains).map(|_| normal.sample(&mut rng).clamp(-ORIENTATION_CLAMP, ORIENTATION_CLAMP)).collect())
}

/// Random-seed periodic Voronoi network with sampled orientations.
pub fn generate_voronoi(cfg: &GeneratorConfig) -> Result<GrainNetwork> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last = Error::InvalidNetwork("no attempt made".into());
    for _ in 0..8 {
        let mut seeds: Vec<Vec2> = (0..cfg.n_grains).map(|_| Vec2::new(DOMAIN * rng.random::<f64>(), DOMAIN * rng.random::<f64>())).collect();
        for _ in 0..3 {
            match periodic_voronoi(&seeds) {
                Ok(mut net) => {
                    for (g, a) in net.grains.iter_mut().zip(sample_orientations(cfg)?) {
                        if let Some(g) = g {
                            g.alpha = a;
                        }
                    }
                    return Ok(net);
                }
                Err(e) => last = e,
            }
            for s in seeds.iter_mut() {
                *s = wrap(*s + Vec2::new(1e-9 * (rng.random::<f64>() - 0.5), 1e-9 * (rng.random::<f64>() - 0.5)));
            }
        }
    }
    Err(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network_sim::DOMAIN_AREA;

    #[test]
    fn small_networks_satisfy_euler() {
        for n in [3, 4, 7, 20, 60] {
            let net = generate_voronoi(&GeneratorConfig { n_grains: n, orientation_std: 0.1, seed: 7 }).unwrap();
            net.validate().unwrap();
            assert_eq!(net.n_grains(), n);
            assert_eq!(net.n_junctions(), 2 * n);
            assert_eq!(net.n_boundaries(), 3 * n);
        }
    }

    #[test]
    fn cell_areas_tile_the_torus() {
        let net = generate_voronoi(&GeneratorConfig { n_grains: 200, orientation_std: 0.1, seed: 3 }).unwrap();
        let total: f64 = net.grain_ids().map(|g| net.grain_area(g)).sum();
        assert!((total - DOMAIN_AREA).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig { n_grains: 100, orientation_std: 0.1, seed: 11 };
        assert_eq!(generate_voronoi(&cfg).unwrap().to_snapshot(), generate_voronoi(&cfg).unwrap().to_snapshot());
    }

    #[test]
    fn orientations_are_clamped_and_centered() {
        let cfg = GeneratorConfig { n_grains: 10_000, orientation_std: 0.1, seed: 5 };
        let a = sample_orientations(&cfg).unwrap();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 3.0 * 0.1 / 100.0);
        assert!(a.iter().all(|x| x.abs() <= ORIENTATION_CLAMP));
        let tiny = sample_orientations(&GeneratorConfig { orientation_std: 1e-15, ..cfg }).unwrap();
        assert!(tiny.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn config_validation() {
        assert!(GeneratorConfig { n_grains: 2, ..Default::default() }.validate().is_err());
        assert!(GeneratorConfig { orientation_std: 0.0, ..Default::default() }.validate().is_err());
    }
}

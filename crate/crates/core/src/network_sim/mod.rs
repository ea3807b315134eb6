//! Grain-boundary network on the flat torus `[0, 2)²` with straight
//! boundaries, per-grain orientations and mobile triple junctions.
//!
//! Entities live in arenas of `Option<_>` so ids stay stable across
//! topology changes. Junction positions are stored unwrapped; each boundary
//! carries an integer image `shift` so its vector is
//! `pos(end1) + 2·shift − pos(end0)`.

pub mod events;
pub mod snapshot;
pub mod step;

use crate::error::{Error, Result};
use crate::surface_tension::SurfaceTensionModel;
use crate::vec2::Vec2;

pub use events::{handle_critical_events, CriticalEvent, EventKind, Thresholds};
pub use step::{Mobility, Scheme, StepConfig, Stepper};

/// Side length of the periodic domain.
pub const DOMAIN: f64 = 2.0;
/// Total area of the periodic domain.
pub const DOMAIN_AREA: f64 = DOMAIN * DOMAIN;

pub type JunctionId = usize;
pub type BoundaryId = usize;
pub type GrainId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub pos: Vec2,
    /// Incident boundaries, sorted by id.
    pub edges: Vec<BoundaryId>,
    /// Pinned junctions never move and may have any degree.
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub ends: [JunctionId; 2],
    pub shift: [i32; 2],
    pub grains: [GrainId; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grain {
    pub alpha: f64,
    /// Bounding boundaries, sorted by id.
    pub boundaries: Vec<BoundaryId>,
}

/// One boundary in the builder input: endpoints, the intended (unwrapped)
/// vector from `ends[0]` to `ends[1]`, and the two grains it separates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub ends: [JunctionId; 2],
    pub vector: Vec2,
    pub grains: [GrainId; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrainNetwork {
    pub junctions: Vec<Option<Junction>>,
    pub boundaries: Vec<Option<Boundary>>,
    pub grains: Vec<Option<Grain>>,
    pub t: f64,
}

/// Image shift that makes `p1 + 2·shift − p0` equal `desired`.
pub(crate) fn shift_for(p0: Vec2, p1: Vec2, desired: Vec2) -> [i32; 2] {
    let d = desired - (p1 - p0);
    [(d.x / DOMAIN).round() as i32, (d.y / DOMAIN).round() as i32]
}

pub(crate) fn insert_sorted(v: &mut Vec<usize>, id: usize) {
    if let Err(pos) = v.binary_search(&id) {
        v.insert(pos, id);
    }
}

pub(crate) fn remove_sorted(v: &mut Vec<usize>, id: usize) {
    if let Ok(pos) = v.binary_search(&id) {
        v.remove(pos);
    }
}

impl GrainNetwork {
    /// Assembles a network from junction positions, boundary specs and grain
    /// orientations. Ids are the indices of the input slices.
    pub fn from_parts(positions: &[Vec2], pinned: &[JunctionId], edges: &[EdgeSpec], alphas: &[f64]) -> Result<Self> {
        let mut net = GrainNetwork {
            junctions: positions.iter().map(|&pos| Some(Junction { pos, edges: Vec::new(), pinned: false })).collect(),
            boundaries: Vec::with_capacity(edges.len()),
            grains: alphas.iter().map(|&alpha| Some(Grain { alpha, boundaries: Vec::new() })).collect(),
            t: 0.0,
        };
        for &p in pinned {
            net.junction_mut(p)?.pinned = true;
        }
        for (id, e) in edges.iter().enumerate() {
            let [j0, j1] = e.ends;
            if j0 >= positions.len() || j1 >= positions.len() {
                return Err(Error::InvalidNetwork(format!("boundary {id} references a missing junction")));
            }
            if e.grains.iter().any(|&g| g >= alphas.len()) {
                return Err(Error::InvalidNetwork(format!("boundary {id} references a missing grain")));
            }
            let shift = shift_for(positions[j0], positions[j1], e.vector);
            net.boundaries.push(Some(Boundary { ends: e.ends, shift, grains: e.grains }));
            for j in [j0, j1] {
                insert_sorted(&mut net.junctions[j].as_mut().unwrap().edges, id);
            }
            for g in e.grains {
                insert_sorted(&mut net.grains[g].as_mut().unwrap().boundaries, id);
            }
        }
        Ok(net)
    }

    pub fn junction(&self, id: JunctionId) -> Result<&Junction> {
        self.junctions.get(id).and_then(Option::as_ref).ok_or_else(|| Error::Topology(format!("junction {id} does not exist")))
    }

    pub fn junction_mut(&mut self, id: JunctionId) -> Result<&mut Junction> {
        self.junctions.get_mut(id).and_then(Option::as_mut).ok_or_else(|| Error::Topology(format!("junction {id} does not exist")))
    }

    pub fn boundary(&self, id: BoundaryId) -> Result<&Boundary> {
        self.boundaries.get(id).and_then(Option::as_ref).ok_or_else(|| Error::Topology(format!("boundary {id} does not exist")))
    }

    pub fn boundary_mut(&mut self, id: BoundaryId) -> Result<&mut Boundary> {
        self.boundaries.get_mut(id).and_then(Option::as_mut).ok_or_else(|| Error::Topology(format!("boundary {id} does not exist")))
    }

    pub fn grain(&self, id: GrainId) -> Result<&Grain> {
        self.grains.get(id).and_then(Option::as_ref).ok_or_else(|| Error::Topology(format!("grain {id} does not exist")))
    }

    pub fn grain_mut(&mut self, id: GrainId) -> Result<&mut Grain> {
        self.grains.get_mut(id).and_then(Option::as_mut).ok_or_else(|| Error::Topology(format!("grain {id} does not exist")))
    }

    pub fn junction_ids(&self) -> impl Iterator<Item = JunctionId> + '_ {
        self.junctions.iter().enumerate().filter_map(|(i, j)| j.as_ref().map(|_| i))
    }

    pub fn boundary_ids(&self) -> impl Iterator<Item = BoundaryId> + '_ {
        self.boundaries.iter().enumerate().filter_map(|(i, b)| b.as_ref().map(|_| i))
    }

    pub fn grain_ids(&self) -> impl Iterator<Item = GrainId> + '_ {
        self.grains.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|_| i))
    }

    pub fn n_junctions(&self) -> usize {
        self.junctions.iter().flatten().count()
    }

    pub fn n_boundaries(&self) -> usize {
        self.boundaries.iter().flatten().count()
    }

    pub fn n_grains(&self) -> usize {
        self.grains.iter().flatten().count()
    }

    pub fn has_pinned(&self) -> bool {
        self.junctions.iter().flatten().any(|j| j.pinned)
    }

    /// Vector from `ends[0]` to `ends[1]`.
    pub fn boundary_vec(&self, b: &Boundary) -> Vec2 {
        let p0 = self.junctions[b.ends[0]].as_ref().map_or(Vec2::ZERO, |j| j.pos);
        let p1 = self.junctions[b.ends[1]].as_ref().map_or(Vec2::ZERO, |j| j.pos);
        p1 + DOMAIN * Vec2::new(b.shift[0] as f64, b.shift[1] as f64) - p0
    }

    pub fn boundary_vec_id(&self, id: BoundaryId) -> Vec2 {
        self.boundaries[id].as_ref().map_or(Vec2::ZERO, |b| self.boundary_vec(b))
    }

    /// Vector along boundary `id` leaving junction `from`.
    pub fn vec_from(&self, id: BoundaryId, from: JunctionId) -> Vec2 {
        let b = self.boundaries[id].as_ref().expect("live boundary");
        let v = self.boundary_vec(b);
        if b.ends[0] == from {
            v
        } else {
            -v
        }
    }

    /// The endpoint of boundary `id` that is not `from`.
    pub fn other_end(&self, id: BoundaryId, from: JunctionId) -> JunctionId {
        let b = self.boundaries[id].as_ref().expect("live boundary");
        if b.ends[0] == from {
            b.ends[1]
        } else {
            b.ends[0]
        }
    }

    pub fn length(&self, id: BoundaryId) -> f64 {
        self.boundary_vec_id(id).norm()
    }

    /// Signed misorientation `α(grains[0]) − α(grains[1])`.
    pub fn misorientation(&self, b: &Boundary) -> f64 {
        let a0 = self.grains[b.grains[0]].as_ref().map_or(0.0, |g| g.alpha);
        let a1 = self.grains[b.grains[1]].as_ref().map_or(0.0, |g| g.alpha);
        a0 - a1
    }

    pub fn boundary_sigma(&self, id: BoundaryId, model: &SurfaceTensionModel) -> f64 {
        self.boundaries[id].as_ref().map_or(0.0, |b| model.sigma(self.misorientation(b)))
    }

    /// `Σ σ(Δα)|Γ|` over the given boundaries.
    pub fn local_energy(&self, ids: &[BoundaryId], model: &SurfaceTensionModel) -> f64 {
        ids.iter()
            .filter_map(|&id| self.boundaries[id].as_ref())
            .map(|b| model.sigma(self.misorientation(b)) * self.boundary_vec(b).norm())
            .sum()
    }

    pub fn total_length(&self) -> f64 {
        self.boundaries.iter().flatten().map(|b| self.boundary_vec(b).norm()).sum()
    }

    pub fn mean_length(&self) -> f64 {
        let n = self.n_boundaries();
        if n == 0 {
            0.0
        } else {
            self.total_length() / n as f64
        }
    }

    /// Number of sides of each grain (its boundary count).
    pub fn sides(&self, g: GrainId) -> usize {
        self.grains[g].as_ref().map_or(0, |g| g.boundaries.len())
    }

    /// The boundary at junction `j` other than `skip` that borders `g`.
    fn next_around(&self, j: JunctionId, skip: BoundaryId, g: GrainId) -> Option<BoundaryId> {
        let junc = self.junctions[j].as_ref()?;
        junc.edges
            .iter()
            .copied()
            .find(|&e| e != skip && self.boundaries[e].as_ref().is_some_and(|b| b.grains.contains(&g)))
    }

    /// Closed walk around grain `g`: junction ids in order with unwrapped
    /// vertex positions relative to the first one. `None` for open grains.
    pub fn grain_polygon(&self, g: GrainId) -> Option<(Vec<JunctionId>, Vec<Vec2>)> {
        let grain = self.grains.get(g)?.as_ref()?;
        let &start = grain.boundaries.first()?;
        let b0 = self.boundaries[start].as_ref()?;
        let j_start = b0.ends[0];
        let mut ids = vec![j_start];
        let mut pts = vec![Vec2::ZERO];
        let mut cur = j_start;
        let mut edge = start;
        let mut p = Vec2::ZERO;
        for _ in 0..grain.boundaries.len() {
            p += self.vec_from(edge, cur);
            cur = self.other_end(edge, cur);
            if cur == j_start {
                break;
            }
            ids.push(cur);
            pts.push(p);
            edge = self.next_around(cur, edge, g)?;
        }
        (cur == j_start && ids.len() == grain.boundaries.len()).then_some((ids, pts))
    }

    /// Unsigned polygon area of grain `g` (0 for open or degenerate grains).
    pub fn grain_area(&self, g: GrainId) -> f64 {
        match self.grain_polygon(g) {
            Some((_, pts)) => {
                let n = pts.len();
                let s: f64 = (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum();
                0.5 * s.abs()
            }
            None => 0.0,
        }
    }

    /// Checks degree-3 junctions, distinct grains across every boundary,
    /// consistent adjacency lists, the torus Euler relation, and positive
    /// boundary lengths. The Euler check is skipped when pinned junctions
    /// make the network an open fragment.
    pub fn validate(&self) -> Result<()> {
        for (id, b) in self.boundaries.iter().enumerate() {
            let Some(b) = b else { continue };
            if b.grains[0] == b.grains[1] {
                return Err(Error::InvalidNetwork(format!("boundary {id} separates grain {} from itself", b.grains[0])));
            }
            if b.ends[0] == b.ends[1] {
                return Err(Error::InvalidNetwork(format!("boundary {id} is a loop")));
            }
            for &j in &b.ends {
                let junc = self.junction(j).map_err(|_| Error::InvalidNetwork(format!("boundary {id} has a dangling end {j}")))?;
                if junc.edges.binary_search(&id).is_err() {
                    return Err(Error::InvalidNetwork(format!("junction {j} does not list boundary {id}")));
                }
            }
            for &g in &b.grains {
                let grain = self.grain(g).map_err(|_| Error::InvalidNetwork(format!("boundary {id} borders missing grain {g}")))?;
                if grain.boundaries.binary_search(&id).is_err() {
                    return Err(Error::InvalidNetwork(format!("grain {g} does not list boundary {id}")));
                }
            }
            let len = self.boundary_vec(b).norm();
            if !(len > 0.0) {
                return Err(Error::InvalidNetwork(format!("boundary {id} has length {len}")));
            }
        }
        for (id, j) in self.junctions.iter().enumerate() {
            let Some(j) = j else { continue };
            if !j.pinned && j.edges.len() != 3 {
                return Err(Error::InvalidNetwork(format!("junction {id} has degree {}", j.edges.len())));
            }
            if !j.pos.is_finite() {
                return Err(Error::InvalidNetwork(format!("junction {id} has a non-finite position")));
            }
            for &e in &j.edges {
                if !self.boundary(e).is_ok_and(|b| b.ends.contains(&id)) {
                    return Err(Error::InvalidNetwork(format!("junction {id} lists foreign boundary {e}")));
                }
            }
        }
        for (id, g) in self.grains.iter().enumerate() {
            let Some(g) = g else { continue };
            if !g.alpha.is_finite() {
                return Err(Error::InvalidNetwork(format!("grain {id} has a non-finite orientation")));
            }
            for &e in &g.boundaries {
                if !self.boundary(e).is_ok_and(|b| b.grains.contains(&id)) {
                    return Err(Error::InvalidNetwork(format!("grain {id} lists foreign boundary {e}")));
                }
            }
        }
        if !self.has_pinned() {
            let (v, e, f) = (self.n_junctions() as i64, self.n_boundaries() as i64, self.n_grains() as i64);
            if v - e + f != 0 {
                return Err(Error::InvalidNetwork(format!("Euler characteristic V−E+F = {} (V={v}, E={e}, F={f})", v - e + f)));
            }
        }
        Ok(())
    }

    /// `Σ σ(Δα)|Γ|` over all boundaries.
    pub fn total_energy(&self, model: &SurfaceTensionModel) -> f64 {
        self.boundaries
            .iter()
            .flatten()
            .map(|b| model.sigma(self.misorientation(b)) * self.boundary_vec(b).norm())
            .sum()
    }

    /// Per-grain `dα/dt = −γ ∂E/∂α`, indexed by grain id (0 for dead ids).
    pub fn orientation_rhs(&self, model: &SurfaceTensionModel, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.grains.len()];
        for b in self.boundaries.iter().flatten() {
            let l = self.boundary_vec(b).norm();
            let ds = model.dsigma(self.misorientation(b));
            out[b.grains[0]] -= gamma * l * ds;
            out[b.grains[1]] += gamma * l * ds;
        }
        out
    }

    /// Per-junction `da/dt = η Σ σ(Δα) unit(b)`, indexed by junction id;
    /// pinned and dead junctions get zero.
    pub fn junction_rhs(&self, model: &SurfaceTensionModel, eta: f64) -> Result<Vec<Vec2>> {
        let mut out = vec![Vec2::ZERO; self.junctions.len()];
        for (id, b) in self.boundaries.iter().enumerate() {
            let Some(b) = b else { continue };
            let v = self.boundary_vec(b);
            let l = v.norm();
            if !(l >= crate::junction_dynamics::LENGTH_FLOOR) {
                return Err(Error::AnchorCollision { anchor: id, length: l });
            }
            let f = model.sigma(self.misorientation(b)) * eta / l * v;
            out[b.ends[0]] += f;
            out[b.ends[1]] -= f;
        }
        for (id, j) in self.junctions.iter().enumerate() {
            if j.as_ref().is_none_or(|j| j.pinned) {
                out[id] = Vec2::ZERO;
            }
        }
        Ok(out)
    }

    /// Max junction force magnitude (η = 1) plus max `|dα/dt|` (γ = 1).
    pub fn equilibrium_residual(&self, model: &SurfaceTensionModel) -> f64 {
        let f = self
            .junction_rhs(model, 1.0)
            .map(|v| v.iter().map(|x| x.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY);
        let a = self.orientation_rhs(model, 1.0).iter().map(|x| x.abs()).fold(0.0, f64::max);
        f + a
    }

    pub fn orientation_sum(&self) -> f64 {
        self.grains.iter().flatten().map(|g| g.alpha).sum()
    }

    /// `4 / N`.
    pub fn average_area(&self) -> Result<f64> {
        let n = self.n_grains();
        if n == 0 {
            return Err(Error::Empty("network has no grains".into()));
        }
        Ok(DOMAIN_AREA / n as f64)
    }

    /// Regular-angle honeycomb with `cols × rows` hexagons (`rows` even).
    ///
    /// Vertical sides have length `h` and slanted sides length
    /// `s = 2/(√3·cols)`, chosen so the lattice tiles the square torus with
    /// every junction angle equal to 2π/3.
    pub fn honeycomb(cols: usize, rows: usize, alpha: f64) -> Result<Self> {
        if cols < 2 || rows < 2 || rows % 2 != 0 {
            return Err(Error::InvalidArgument("honeycomb needs cols >= 2 and an even rows >= 2".into()));
        }
        let w = DOMAIN / cols as f64;
        let s = w / 3f64.sqrt();
        let big_h = DOMAIN / rows as f64;
        let h = big_h - s / 2.0;
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("too many rows for the column count".into()));
        }
        let hex = |c: i64, r: i64| -> usize { (r.rem_euclid(rows as i64) as usize) * cols + c.rem_euclid(cols as i64) as usize };
        let center = |c: i64, r: i64| -> Vec2 {
            let off = if r.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
            Vec2::new((c as f64 + off) * w, r as f64 * big_h)
        };
        // Junction ids: 2·hex for the top vertex, 2·hex + 1 for the upper-right.
        let top = |c: i64, r: i64| center(c, r) + Vec2::new(0.0, h / 2.0 + s / 2.0);
        let ur = |c: i64, r: i64| center(c, r) + Vec2::new(w / 2.0, h / 2.0);
        let upper_right = |c: i64, r: i64| if r.rem_euclid(2) == 0 { (c, r + 1) } else { (c + 1, r + 1) };
        let upper_left = |c: i64, r: i64| if r.rem_euclid(2) == 0 { (c - 1, r + 1) } else { (c, r + 1) };
        let lower_right = |c: i64, r: i64| if r.rem_euclid(2) == 0 { (c, r - 1) } else { (c + 1, r - 1) };
        let wrap = |p: Vec2| Vec2::new(p.x.rem_euclid(DOMAIN), p.y.rem_euclid(DOMAIN));
        let n = cols * rows;
        let mut positions = vec![Vec2::ZERO; 2 * n];
        let mut edges = Vec::with_capacity(3 * n);
        for r in 0..rows as i64 {
            for c in 0..cols as i64 {
                let g = hex(c, r);
                positions[2 * g] = wrap(top(c, r));
                positions[2 * g + 1] = wrap(ur(c, r));
                // Right side: lower-right vertex (top of the lower-right hex) up to UR.
                let (lc, lr) = lower_right(c, r);
                edges.push(EdgeSpec {
                    ends: [2 * hex(lc, lr), 2 * g + 1],
                    vector: ur(c, r) - (center(c, r) + Vec2::new(w / 2.0, -h / 2.0)),
                    grains: [g, hex(c + 1, r)],
                });
                let (rc, rr) = upper_right(c, r);
                edges.push(EdgeSpec { ends: [2 * g + 1, 2 * g], vector: top(c, r) - ur(c, r), grains: [g, hex(rc, rr)] });
                // Upper-left vertex is the UR vertex of the left neighbour.
                let (uc, urr) = upper_left(c, r);
                edges.push(EdgeSpec { ends: [2 * g, 2 * hex(c - 1, r) + 1], vector: ur(c - 1, r) - top(c, r), grains: [g, hex(uc, urr)] });
            }
        }
        Self::from_parts(&positions, &[], &edges, &vec![alpha; n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SurfaceTensionModel {
        SurfaceTensionModel::builtin()
    }

    #[test]
    fn honeycomb_is_valid_equilibrium() {
        let net = GrainNetwork::honeycomb(4, 4, 0.1).unwrap();
        net.validate().unwrap();
        assert_eq!(net.n_grains(), 16);
        assert_eq!(net.n_junctions(), 32);
        assert_eq!(net.n_boundaries(), 48);
        assert!(net.equilibrium_residual(&model()) < 1e-12);
        for g in net.grain_ids() {
            assert_eq!(net.sides(g), 6);
            assert!((net.grain_area(g) - DOMAIN_AREA / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn honeycomb_energy_matches_edge_count() {
        let (cols, rows) = (3, 4);
        let net = GrainNetwork::honeycomb(cols, rows, 0.0).unwrap();
        let m = (cols * rows) as f64;
        let s = DOMAIN / cols as f64 / 3f64.sqrt();
        let h = DOMAIN / rows as f64 - s / 2.0;
        assert!((net.total_energy(&model()) - m * (h + 2.0 * s)).abs() < 1e-12);
    }

    #[test]
    fn orientation_rhs_is_antisymmetric_pairwise() {
        let mut net = GrainNetwork::honeycomb(2, 2, 0.0).unwrap();
        net.grains[0].as_mut().unwrap().alpha = 0.1;
        net.grains[1].as_mut().unwrap().alpha = -0.2;
        let d = net.orientation_rhs(&model(), 1.0);
        assert!(d.iter().sum::<f64>().abs() < 1e-14);
        assert!(d[0] < 0.0 && d[1] > 0.0);
    }

    #[test]
    fn validate_catches_bad_degree() {
        let mut net = GrainNetwork::honeycomb(2, 2, 0.0).unwrap();
        let e = net.junctions[0].as_ref().unwrap().edges[0];
        net.junctions[0].as_mut().unwrap().edges.retain(|&x| x != e);
        assert!(net.validate().is_err());
    }

    #[test]
    fn average_area_counts_grains() {
        let net = GrainNetwork::honeycomb(2, 2, 0.0).unwrap();
        assert_eq!(net.average_area().unwrap(), 1.0);
        assert!(GrainNetwork::default().average_area().is_err());
    }
}

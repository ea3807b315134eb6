//! Topological events: neighbor switches across short boundaries, removal
//! of vanishing triangular grains, and cleanup of degenerate two-sided
//! grains.
//!
//! Candidates are processed shortest boundary first. An event is applied only
//! when it does not raise the energy of the affected boundaries, unless the
//! boundary has fallen below the hard length floor, in which case the
//! lowest-energy resolution is forced.

use crate::error::{Error, Result};
use crate::geometry::weighted_fermat_point;
use crate::surface_tension::SurfaceTensionModel;
use crate::vec2::Vec2;

use super::{insert_sorted, remove_sorted, shift_for, BoundaryId, GrainId, GrainNetwork, JunctionId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Boundaries shorter than this are event candidates.
    pub l_min: f64,
    /// Triangular grains smaller than this are removal candidates.
    pub area_min: f64,
    /// Boundaries shorter than this force an event.
    pub l_floor: f64,
}

impl Thresholds {
    /// `l_min = 1e-3·mean`, `area_min = l_min²`, `l_floor = 1e-6·l_min`.
    pub fn from_mean_length(mean: f64) -> Self {
        let l_min = 1e-3 * mean;
        Thresholds { l_min, area_min: l_min * l_min, l_floor: 1e-6 * l_min }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Short boundary contracted and re-split with the other pairing.
    NeighborSwitch,
    /// Triangular grain collapsed to a single junction.
    TriangleRemoval,
    /// Degenerate two-sided grain replaced by a single boundary.
    TwoSidedRemoval,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::NeighborSwitch => "neighbor-switch",
            EventKind::TriangleRemoval => "triangle-removal",
            EventKind::TwoSidedRemoval => "two-sided-removal",
        }
    }

    pub fn removes_grain(self) -> bool {
        !matches!(self, EventKind::NeighborSwitch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalEvent {
    pub kind: EventKind,
    pub t: f64,
    /// Boundary id for switches; grain id followed by junction ids for removals.
    pub ids: Vec<usize>,
    /// Energy after minus before over the affected boundaries.
    pub energy_change: f64,
    pub forced: bool,
}

/// Appends `(t, kind, ids)` rows; ids are `;`-separated.
pub fn write_event_log<W: std::io::Write>(events: &[CriticalEvent], mut w: W) -> Result<()> {
    writeln!(w, "# units: t [time], energy_change [energy]")?;
    writeln!(w, "t,kind,ids,energy_change,forced")?;
    for e in events {
        let ids: Vec<String> = e.ids.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{:?},{},{},{:?},{}", e.t, e.kind.as_str(), ids.join(";"), e.energy_change, e.forced)?;
    }
    Ok(())
}

/// Local geometry of a planned neighbor switch, in the frame of `u`.
#[derive(Debug, Clone, Copy)]
struct SwitchPlan {
    e: BoundaryId,
    u: JunctionId,
    v: JunctionId,
    a1: BoundaryId,
    a2: BoundaryId,
    b1: BoundaryId,
    b2: BoundaryId,
    g_l: GrainId,
    g_r: GrainId,
    g_a: GrainId,
    g_b: GrainId,
    far: [Vec2; 4],
    p: Vec2,
    q: Vec2,
    de: f64,
}

#[derive(Debug, Clone)]
struct TrianglePlan {
    g: GrainId,
    js: [JunctionId; 3],
    internal: [BoundaryId; 3],
    outer: [BoundaryId; 3],
    far: [Vec2; 3],
    p: Vec2,
    de: f64,
}

/// Outcome of splitting a four-fold junction into two triple junctions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    /// Index pairs into the four outer points that share a new junction.
    pub pairing: [[usize; 2]; 2],
    pub p: Vec2,
    pub q: Vec2,
    pub energy: f64,
}

/// Best placement of a split of a four-fold junction at `center` whose
/// outer endpoints `far` are listed in angular order, for the given
/// pairing. `sigma_new` is the tension of the inserted boundary.
pub fn split_energy(
    center: Vec2,
    far: &[Vec2; 4],
    sigma: &[f64; 4],
    pairing: [[usize; 2]; 2],
    sigma_new: f64,
    lengths: &[f64],
    fallback_dir: Vec2,
) -> SplitChoice {
    let [[i1, i2], [k1, k2]] = pairing;
    let pull = |i: usize| sigma[i] * (far[i] - center).unit();
    let f = pull(i1) + pull(i2) - pull(k1) - pull(k2);
    let perp = fallback_dir.unit();
    let perp = if f.dot(perp) < 0.0 { -perp } else { perp };
    let mut dirs = vec![perp];
    if f.norm() > 0.0 {
        dirs.push(f.unit());
    }
    let mut best = SplitChoice { pairing, p: center, q: center, energy: f64::INFINITY };
    for &d in lengths {
        for &dir in &dirs {
            let p = center + 0.5 * d * dir;
            let q = center - 0.5 * d * dir;
            let e = sigma[i1] * (far[i1] - p).norm()
                + sigma[i2] * (far[i2] - p).norm()
                + sigma[k1] * (far[k1] - q).norm()
                + sigma[k2] * (far[k2] - q).norm()
                + sigma_new * d;
            if e < best.energy {
                best = SplitChoice { pairing, p, q, energy: e };
            }
        }
    }
    best
}

/// Both planar pairings of a four-fold junction with their best energies.
pub fn enumerate_splits(
    center: Vec2,
    far: &[Vec2; 4],
    sigma: &[f64; 4],
    sigma_new: [f64; 2],
    lengths: &[f64],
) -> [SplitChoice; 2] {
    let pairings = [[[0, 1], [2, 3]], [[1, 2], [3, 0]]];
    let mut out = [SplitChoice { pairing: pairings[0], p: center, q: center, energy: f64::INFINITY }; 2];
    for (k, &pairing) in pairings.iter().enumerate() {
        let mid_a = 0.5 * ((far[pairing[0][0]] - center).unit() + (far[pairing[0][1]] - center).unit());
        out[k] = split_energy(center, far, sigma, pairing, sigma_new[k], lengths, mid_a);
    }
    out
}

impl GrainNetwork {
    fn replace_end(&mut self, b: BoundaryId, old: JunctionId, new: JunctionId) -> Result<()> {
        let bd = self.boundary_mut(b)?;
        for e in bd.ends.iter_mut() {
            if *e == old {
                *e = new;
                return Ok(());
            }
        }
        Err(Error::Topology(format!("boundary {b} does not end at junction {old}")))
    }

    /// Sets the image shift so the vector leaving `from` along `b` is `v`.
    fn set_vec_from(&mut self, b: BoundaryId, from: JunctionId, v: Vec2) -> Result<()> {
        let bd = self.boundary(b)?.clone();
        let desired = if bd.ends[0] == from { v } else { -v };
        let p0 = self.junction(bd.ends[0])?.pos;
        let p1 = self.junction(bd.ends[1])?.pos;
        self.boundary_mut(b)?.shift = shift_for(p0, p1, desired);
        Ok(())
    }

    fn other_grain(&self, b: BoundaryId, g: GrainId) -> Result<GrainId> {
        let bd = self.boundary(b)?;
        if bd.grains[0] == g {
            Ok(bd.grains[1])
        } else if bd.grains[1] == g {
            Ok(bd.grains[0])
        } else {
            Err(Error::Topology(format!("boundary {b} does not border grain {g}")))
        }
    }

    /// The two boundaries at `j` besides `e`, ordered so the first borders `g`.
    fn split_pair(&self, j: JunctionId, e: BoundaryId, g: GrainId) -> Option<(BoundaryId, BoundaryId)> {
        let junc = self.junctions[j].as_ref()?;
        if junc.pinned || junc.edges.len() != 3 {
            return None;
        }
        let others: Vec<_> = junc.edges.iter().copied().filter(|&x| x != e).collect();
        if others.len() != 2 {
            return None;
        }
        let borders = |b: BoundaryId| self.boundaries[b].as_ref().is_some_and(|bd| bd.grains.contains(&g));
        match (borders(others[0]), borders(others[1])) {
            (true, false) => Some((others[0], others[1])),
            (false, true) => Some((others[1], others[0])),
            _ => None,
        }
    }

    fn plan_switch(&self, e: BoundaryId, model: &SurfaceTensionModel, thr: &Thresholds) -> Option<SwitchPlan> {
        let b = self.boundaries[e].as_ref()?;
        let [u, v] = b.ends;
        let [g_l, g_r] = b.grains;
        if self.sides(g_l) <= 3 || self.sides(g_r) <= 3 {
            return None;
        }
        let (a1, a2) = self.split_pair(u, e, g_l)?;
        let (b1, b2) = self.split_pair(v, e, g_l)?;
        let g_a = self.other_grain(a1, g_l).ok()?;
        let g_b = self.other_grain(b1, g_l).ok()?;
        if self.other_grain(a2, g_r).ok()? != g_a || self.other_grain(b2, g_r).ok()? != g_b {
            return None;
        }
        if g_a == g_b || [g_a, g_b].iter().any(|g| [g_l, g_r].contains(g)) {
            return None;
        }
        if self.sides(g_a) < 3 || self.sides(g_b) < 3 {
            return None;
        }
        let ev = self.vec_from(e, u);
        let far = [self.vec_from(a1, u), self.vec_from(a2, u), ev + self.vec_from(b1, v), ev + self.vec_from(b2, v)];
        let sig = |x: BoundaryId| self.boundary_sigma(x, model);
        let sigma = [sig(a1), sig(a2), sig(b1), sig(b2)];
        let before = sig(e) * ev.norm()
            + sigma[0] * far[0].norm()
            + sigma[1] * far[1].norm()
            + sigma[2] * (far[2] - ev).norm()
            + sigma[3] * (far[3] - ev).norm();
        let alpha = |g: GrainId| self.grains[g].as_ref().map_or(0.0, |x| x.alpha);
        let sigma_new = model.sigma(alpha(g_a) - alpha(g_b));
        let m = 0.5 * ev;
        // Pair {a1, b1} meets at p (inside g_l), {a2, b2} at q.
        let choice = split_energy(
            m,
            &[far[0], far[2], far[1], far[3]],
            &[sigma[0], sigma[2], sigma[1], sigma[3]],
            [[0, 1], [2, 3]],
            sigma_new,
            &[1.1 * thr.l_min, 0.5 * thr.l_min, 0.1 * thr.l_min],
            ev.perp(),
        );
        Some(SwitchPlan {
            e,
            u,
            v,
            a1,
            a2,
            b1,
            b2,
            g_l,
            g_r,
            g_a,
            g_b,
            far,
            p: choice.p,
            q: choice.q,
            de: choice.energy - before,
        })
    }

    fn apply_switch(&mut self, s: &SwitchPlan) -> Result<()> {
        let origin = self.junction(s.u)?.pos;
        self.junction_mut(s.u)?.pos = origin + s.p;
        self.junction_mut(s.v)?.pos = origin + s.q;
        {
            let ju = self.junction_mut(s.u)?;
            remove_sorted(&mut ju.edges, s.a2);
            insert_sorted(&mut ju.edges, s.b1);
        }
        {
            let jv = self.junction_mut(s.v)?;
            remove_sorted(&mut jv.edges, s.b1);
            insert_sorted(&mut jv.edges, s.a2);
        }
        self.replace_end(s.b1, s.v, s.u)?;
        self.replace_end(s.a2, s.u, s.v)?;
        self.boundary_mut(s.e)?.grains = [s.g_a, s.g_b];
        remove_sorted(&mut self.grain_mut(s.g_l)?.boundaries, s.e);
        remove_sorted(&mut self.grain_mut(s.g_r)?.boundaries, s.e);
        insert_sorted(&mut self.grain_mut(s.g_a)?.boundaries, s.e);
        insert_sorted(&mut self.grain_mut(s.g_b)?.boundaries, s.e);
        self.set_vec_from(s.a1, s.u, s.far[0] - s.p)?;
        self.set_vec_from(s.b1, s.u, s.far[2] - s.p)?;
        self.set_vec_from(s.a2, s.v, s.far[1] - s.q)?;
        self.set_vec_from(s.b2, s.v, s.far[3] - s.q)?;
        self.set_vec_from(s.e, s.u, s.q - s.p)?;
        Ok(())
    }

    fn plan_triangle(&self, g: GrainId, model: &SurfaceTensionModel) -> Option<TrianglePlan> {
        let grain = self.grains[g].as_ref()?;
        if grain.boundaries.len() != 3 {
            return None;
        }
        let (ids, pts) = self.grain_polygon(g)?;
        let js: [JunctionId; 3] = ids.try_into().ok()?;
        if js[0] == js[1] || js[1] == js[2] || js[0] == js[2] {
            return None;
        }
        let internal: [BoundaryId; 3] = grain.boundaries.clone().try_into().ok()?;
        let mut outer = [0; 3];
        let mut far = [Vec2::ZERO; 3];
        for i in 0..3 {
            let j = self.junctions[js[i]].as_ref()?;
            if j.pinned || j.edges.len() != 3 {
                return None;
            }
            let o: Vec<_> = j.edges.iter().copied().filter(|x| !internal.contains(x)).collect();
            if o.len() != 1 {
                return None;
            }
            outer[i] = o[0];
            if js.contains(&self.other_end(o[0], js[i])) {
                return None;
            }
            far[i] = pts[i] + self.vec_from(o[0], js[i]);
        }
        let sigma = outer.map(|o| self.boundary_sigma(o, model));
        let before = self.local_energy(&internal, model) + self.local_energy(&outer, model);
        let after = |p: Vec2| (0..3).map(|i| sigma[i] * (far[i] - p).norm()).sum::<f64>();
        let c = (pts[0] + pts[1] + pts[2]) / 3.0;
        let mut candidates = vec![c, pts[0], pts[1], pts[2]];
        if let Ok(sol) = weighted_fermat_point(&far, &sigma, 1e-12) {
            candidates.push(match sol.at_vertex {
                Some(k) => far[k] + 0.01 * (c - far[k]),
                None => sol.point,
            });
        }
        let p = candidates
            .into_iter()
            .filter(|p| far.iter().all(|f| (*f - *p).norm() > 0.0))
            .min_by(|a, b| after(*a).total_cmp(&after(*b)))?;
        Some(TrianglePlan { g, js, internal, outer, far, p, de: after(p) - before })
    }

    fn apply_triangle(&mut self, t: &TrianglePlan) -> Result<()> {
        let z = t.js[0];
        let origin = self.junction(z)?.pos;
        for &b in &t.internal {
            let bd = self.boundary(b)?.clone();
            for gr in bd.grains {
                remove_sorted(&mut self.grain_mut(gr)?.boundaries, b);
            }
            self.boundaries[b] = None;
        }
        self.grains[t.g] = None;
        for i in 1..3 {
            self.replace_end(t.outer[i], t.js[i], z)?;
            self.junctions[t.js[i]] = None;
        }
        let jz = self.junction_mut(z)?;
        jz.pos = origin + t.p;
        jz.edges = t.outer.to_vec();
        jz.edges.sort_unstable();
        for i in 0..3 {
            self.set_vec_from(t.outer[i], z, t.far[i] - t.p)?;
        }
        Ok(())
    }

    /// Replaces a two-sided grain and its neighbours' third boundaries by a
    /// single straight boundary; returns the event and energy change.
    fn remove_two_sided(&mut self, g: GrainId, model: &SurfaceTensionModel) -> Result<(Vec<usize>, f64)> {
        let grain = self.grain(g)?.clone();
        let [e1, e2]: [BoundaryId; 2] = grain
            .boundaries
            .clone()
            .try_into()
            .map_err(|_| Error::Topology(format!("grain {g} is not two-sided")))?;
        let b1 = self.boundary(e1)?.clone();
        let b2 = self.boundary(e2)?.clone();
        let [p, q] = b1.ends;
        if !(b2.ends.contains(&p) && b2.ends.contains(&q)) {
            return Err(Error::Topology(format!("two-sided grain {g} has mismatched boundaries")));
        }
        let third = |j: JunctionId| -> Result<BoundaryId> {
            let junc = self.junction(j)?;
            if junc.pinned || junc.edges.len() != 3 {
                return Err(Error::Topology(format!("junction {j} of two-sided grain {g} is not a free triple junction")));
            }
            junc.edges.iter().copied().find(|&x| x != e1 && x != e2).ok_or_else(|| Error::Topology(format!("junction {j} has no third boundary")))
        };
        let op = third(p)?;
        let oq = third(q)?;
        let far_p = self.other_end(op, p);
        let far_q = self.other_end(oq, q);
        if op == oq || far_p == far_q {
            return Err(Error::Topology(format!("removing two-sided grain {g} would create a loop")));
        }
        let mut gp = self.boundary(op)?.grains;
        let mut gq = self.boundary(oq)?.grains;
        gp.sort_unstable();
        gq.sort_unstable();
        if gp != gq {
            return Err(Error::Topology(format!("third boundaries of two-sided grain {g} separate different grains")));
        }
        let (short, _) = if self.length(e1) <= self.length(e2) { (e1, e2) } else { (e2, e1) };
        let new_vec = -self.vec_from(op, p) + self.vec_from(short, p) + self.vec_from(oq, q);
        let before = self.local_energy(&[e1, e2, op, oq], model);
        let after = self.boundary_sigma(op, model) * new_vec.norm();

        for b in [e1, e2, oq] {
            let bd = self.boundary(b)?.clone();
            for gr in bd.grains {
                if let Some(Some(grain)) = self.grains.get_mut(gr) {
                    remove_sorted(&mut grain.boundaries, b);
                }
            }
            self.boundaries[b] = None;
        }
        self.grains[g] = None;
        self.junctions[p] = None;
        self.junctions[q] = None;
        self.boundary_mut(op)?.ends = [far_p, far_q];
        {
            let jq = self.junction_mut(far_q)?;
            remove_sorted(&mut jq.edges, oq);
            insert_sorted(&mut jq.edges, op);
        }
        self.set_vec_from(op, far_p, new_vec)?;
        Ok((vec![g, p, q], after - before))
    }
}

/// Resolves every pending event. Returns the events applied in order.
pub fn handle_critical_events(net: &mut GrainNetwork, model: &SurfaceTensionModel, thr: &Thresholds) -> Result<Vec<CriticalEvent>> {
    let mut events = Vec::new();
    let limit = 4 * net.boundaries.len() + 16;
    for _ in 0..limit {
        if net.n_grains() <= 1 {
            break;
        }
        let degenerate = net.grain_ids().find(|&g| net.sides(g) <= 2);
        if let Some(g) = degenerate {
            let (ids, de) = net.remove_two_sided(g, model)?;
            events.push(CriticalEvent { kind: EventKind::TwoSidedRemoval, t: net.t, ids, energy_change: de, forced: true });
            continue;
        }
        let mut short: Vec<(f64, BoundaryId)> = net
            .boundaries
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.as_ref().map(|b| (net.boundary_vec(b).norm(), i)))
            .filter(|&(l, _)| l < thr.l_min)
            .collect();
        short.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut applied = false;
        for &(len, e) in &short {
            let forced = len < thr.l_floor;
            let b = net.boundary(e)?.clone();
            let tri = b.grains.iter().copied().filter(|&g| net.sides(g) == 3).min_by(|&x, &y| net.grain_area(x).total_cmp(&net.grain_area(y)));
            if let Some(g) = tri {
                if let Some(plan) = net.plan_triangle(g, model) {
                    if plan.de <= 0.0 || forced {
                        net.apply_triangle(&plan)?;
                        let mut ids = vec![plan.g];
                        ids.extend(plan.js);
                        events.push(CriticalEvent { kind: EventKind::TriangleRemoval, t: net.t, ids, energy_change: plan.de, forced: forced && plan.de > 0.0 });
                        applied = true;
                        break;
                    }
                } else if forced {
                    return Err(Error::Topology(format!("boundary {e} collapsed but triangle grain {g} cannot be removed")));
                }
                continue;
            }
            match net.plan_switch(e, model, thr) {
                Some(plan) if plan.de <= 0.0 || forced => {
                    net.apply_switch(&plan)?;
                    events.push(CriticalEvent { kind: EventKind::NeighborSwitch, t: net.t, ids: vec![e], energy_change: plan.de, forced: forced && plan.de > 0.0 });
                    applied = true;
                    break;
                }
                None if forced => {
                    return Err(Error::Topology(format!("boundary {e} collapsed but no neighbor switch is legal")));
                }
                _ => {}
            }
        }
        if applied {
            continue;
        }
        // Tiny triangles whose sides are all above the length threshold.
        let slivers: Vec<GrainId> = net.grain_ids().filter(|&g| net.sides(g) == 3 && net.grain_area(g) < thr.area_min).collect();
        for g in slivers {
            if let Some(plan) = net.plan_triangle(g, model) {
                if plan.de <= 0.0 {
                    net.apply_triangle(&plan)?;
                    let mut ids = vec![plan.g];
                    ids.extend(plan.js);
                    events.push(CriticalEvent { kind: EventKind::TriangleRemoval, t: net.t, ids, energy_change: plan.de, forced: false });
                    applied = true;
                    break;
                }
            }
        }
        if !applied {
            return Ok(events);
        }
    }
    Ok(events)
}

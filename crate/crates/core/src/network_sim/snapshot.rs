//! Versioned plain-text network snapshots.
//!
//! ```text
//! grainflow-snapshot 1
//! [meta]
//! t = 0.0
//! [junctions]
//! <id> <x> <y> <pinned>
//! [grains]
//! <id> <alpha>
//! [boundaries]
//! <id> <end0> <end1> <shift_x> <shift_y> <grain0> <grain1>
//! ```
//!
//! Floats are written in shortest round-trip form, so save → load → save is
//! byte-identical.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vec2::Vec2;

use super::{insert_sorted, Boundary, Grain, GrainNetwork, Junction};

pub const SNAPSHOT_MAGIC: &str = "grainflow-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;
/// Largest id accepted when loading, to bound allocation.
pub const MAX_ID: usize = 1 << 24;

impl GrainNetwork {
    pub fn to_snapshot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}");
        let _ = writeln!(s, "[meta]");
        let _ = writeln!(s, "t = {:?}", self.t);
        let _ = writeln!(s, "[junctions]");
        for (id, j) in self.junctions.iter().enumerate() {
            if let Some(j) = j {
                let _ = writeln!(s, "{id} {:?} {:?} {}", j.pos.x, j.pos.y, u8::from(j.pinned));
            }
        }
        let _ = writeln!(s, "[grains]");
        for (id, g) in self.grains.iter().enumerate() {
            if let Some(g) = g {
                let _ = writeln!(s, "{id} {:?}", g.alpha);
            }
        }
        let _ = writeln!(s, "[boundaries]");
        for (id, b) in self.boundaries.iter().enumerate() {
            if let Some(b) = b {
                let _ = writeln!(
                    s,
                    "{id} {} {} {} {} {} {}",
                    b.ends[0], b.ends[1], b.shift[0], b.shift[1], b.grains[0], b.grains[1]
                );
            }
        }
        s
    }

    pub fn save_snapshot(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn load_snapshot(path: &std::path::Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Junctions,
    Grains,
    Boundaries,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(line, format!("invalid {what} `{tok}`")))
}

fn finite(x: f64, line: usize, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(perr(line, format!("{what} is not finite")))
    }
}

fn place<T>(v: &mut Vec<Option<T>>, id: usize, item: T, line: usize, what: &str) -> Result<()> {
    if id >= MAX_ID {
        return Err(perr(line, format!("{what} id {id} too large")));
    }
    if v.len() <= id {
        v.resize_with(id + 1, || None);
    }
    if v[id].is_some() {
        return Err(perr(line, format!("duplicate {what} id {id}")));
    }
    v[id] = Some(item);
    Ok(())
}

impl FromStr for GrainNetwork {
    type Err = Error;

    /// Parses a snapshot and rebuilds adjacency lists. The result is
    /// structurally consistent but not otherwise validated.
    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty snapshot"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(SNAPSHOT_MAGIC) {
            return Err(perr(1, "missing snapshot header"));
        }
        let version: u32 = field(h.next(), 1, "version")?;
        if version != SNAPSHOT_VERSION {
            return Err(perr(1, format!("unsupported snapshot version {version}")));
        }
        let mut net = GrainNetwork::default();
        let mut raw_boundaries: Vec<(usize, usize, Boundary)> = Vec::new();
        let mut section = Section::None;
        let mut seen_t = false;
        for (ln, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[meta]" => Section::Meta,
                    "[junctions]" => Section::Junctions,
                    "[grains]" => Section::Grains,
                    "[boundaries]" => Section::Boundaries,
                    _ => return Err(perr(ln, format!("unknown section {line}"))),
                };
                continue;
            }
            let mut tok = line.split_whitespace();
            match section {
                Section::None => return Err(perr(ln, "data before any section")),
                Section::Meta => {
                    let (k, v) = line.split_once('=').ok_or_else(|| perr(ln, "expected key = value"))?;
                    match k.trim() {
                        "t" => {
                            net.t = finite(field(Some(v.trim()), ln, "time")?, ln, "time")?;
                            seen_t = true;
                        }
                        other => return Err(perr(ln, format!("unknown meta key `{other}`"))),
                    }
                    continue;
                }
                Section::Junctions => {
                    let id: usize = field(tok.next(), ln, "junction id")?;
                    let x = finite(field(tok.next(), ln, "x")?, ln, "x")?;
                    let y = finite(field(tok.next(), ln, "y")?, ln, "y")?;
                    let pinned = match tok.next() {
                        Some("0") => false,
                        Some("1") => true,
                        _ => return Err(perr(ln, "pinned flag must be 0 or 1")),
                    };
                    place(&mut net.junctions, id, Junction { pos: Vec2::new(x, y), edges: Vec::new(), pinned }, ln, "junction")?;
                }
                Section::Grains => {
                    let id: usize = field(tok.next(), ln, "grain id")?;
                    let alpha = finite(field(tok.next(), ln, "orientation")?, ln, "orientation")?;
                    place(&mut net.grains, id, Grain { alpha, boundaries: Vec::new() }, ln, "grain")?;
                }
                Section::Boundaries => {
                    let id: usize = field(tok.next(), ln, "boundary id")?;
                    let e0 = field(tok.next(), ln, "end")?;
                    let e1 = field(tok.next(), ln, "end")?;
                    let sx = field(tok.next(), ln, "shift")?;
                    let sy = field(tok.next(), ln, "shift")?;
                    let g0 = field(tok.next(), ln, "grain")?;
                    let g1 = field(tok.next(), ln, "grain")?;
                    raw_boundaries.push((ln, id, Boundary { ends: [e0, e1], shift: [sx, sy], grains: [g0, g1] }));
                }
            }
            if tok.next().is_some() {
                return Err(perr(ln, "trailing fields"));
            }
        }
        if !seen_t {
            return Err(perr(1, "missing meta key t"));
        }
        for (ln, id, b) in raw_boundaries {
            for &j in &b.ends {
                if net.junctions.get(j).and_then(Option::as_ref).is_none() {
                    return Err(perr(ln, format!("boundary {id} references missing junction {j}")));
                }
            }
            for &g in &b.grains {
                if net.grains.get(g).and_then(Option::as_ref).is_none() {
                    return Err(perr(ln, format!("boundary {id} references missing grain {g}")));
                }
            }
            let (ends, grains) = (b.ends, b.grains);
            place(&mut net.boundaries, id, b, ln, "boundary")?;
            for j in ends {
                insert_sorted(&mut net.junctions[j].as_mut().unwrap().edges, id);
            }
            for g in grains {
                insert_sorted(&mut net.grains[g].as_mut().unwrap().boundaries, id);
            }
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let mut net = GrainNetwork::honeycomb(3, 2, 0.1).unwrap();
        net.t = 0.123456789;
        net.junctions[0].as_mut().unwrap().pos.x += 1e-17;
        let s1 = net.to_snapshot();
        let back: GrainNetwork = s1.parse().unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_snapshot(), s1);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!("".parse::<GrainNetwork>().is_err());
        assert!("grainflow-snapshot 2\n[meta]\nt = 0.0\n".parse::<GrainNetwork>().is_err());
        assert!("grainflow-snapshot 1\n[meta]\nt = 0.0\n[junctions]\n0 0.0 nan 0\n".parse::<GrainNetwork>().is_err());
        assert!("grainflow-snapshot 1\n[meta]\nt = 0.0\n[boundaries]\n0 0 1 0 0 0 1\n".parse::<GrainNetwork>().is_err());
        assert!("grainflow-snapshot 1\n[meta]\nt = 0.0\n[grains]\n0 0.0\n0 0.1\n".parse::<GrainNetwork>().is_err());
        let ok = "grainflow-snapshot 1\n[meta]\nt = 0.5\n[grains]\n3 0.25\n".parse::<GrainNetwork>().unwrap();
        assert_eq!(ok.grains.len(), 4);
        assert_eq!(ok.t, 0.5);
    }
}

//! Line-oriented text form of a covering.
//!
//! ```text
//! czsob-covering 1
//! dim 2
//! frame <origin…> <axes, row-major…>
//! params <min_side> <c_w>
//! <id> <level> <index…> <C|P|U> <parent|-> <canvas ids, comma-separated|->
//! ```

use std::fmt::Write as _;

use super::{build_covering_in, Covering, Cube, WhitneyError};
use crate::geometry::{Domain, Frame};

const MAGIC: &str = "czsob-covering 1";

pub fn dump_covering(cov: &Covering) -> String {
    let mut s = String::new();
    let d = cov.dim();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "dim {d}").unwrap();
    write!(s, "frame").unwrap();
    for v in cov.frame.origin.iter().chain(cov.frame.axes.iter().flatten()) {
        write!(s, " {v}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "params {} {}", cov.min_side, cov.c_w).unwrap();
    let o = cov.orientation.as_ref();
    for (i, q) in cov.cubes.iter().enumerate() {
        write!(s, "{i} {}", q.level).unwrap();
        for k in &q.index {
            write!(s, " {k}").unwrap();
        }
        match o {
            Some(o) => {
                let flag = if o.central[i] { "C" } else { "P" };
                let parent = o.parent[i].map_or("-".to_string(), |p| p.to_string());
                let canv = if o.canvases[i].is_empty() {
                    "-".to_string()
                } else {
                    o.canvases[i].iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
                };
                writeln!(s, " {flag} {parent} {canv}").unwrap();
            }
            None => writeln!(s, " U - -").unwrap(),
        }
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> WhitneyError {
    WhitneyError::Parse { line, msg: msg.into() }
}

struct Row {
    cube: Cube,
    flag: char,
    parent: Option<usize>,
    canvases: Vec<usize>,
}

/// Rebuild a covering of `domain` from its dump. The cube set, flags,
/// parents and canvases must agree with a fresh construction.
pub fn load_covering(domain: &Domain, text: &str) -> Result<Covering, WhitneyError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    if first != MAGIC {
        return Err(parse_err(n, format!("expected header `{MAGIC}`")));
    }
    let (n, dim_line) = lines.next().ok_or_else(|| parse_err(n + 1, "missing dim"))?;
    let d: usize = dim_line
        .strip_prefix("dim ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| parse_err(n, "expected `dim <d>`"))?;
    if d != domain.dim() {
        return Err(parse_err(n, format!("dimension {d} does not match the domain")));
    }
    let (n, frame_line) = lines.next().ok_or_else(|| parse_err(n + 1, "missing frame"))?;
    let vals: Vec<f64> = frame_line
        .strip_prefix("frame")
        .ok_or_else(|| parse_err(n, "expected `frame`"))?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(n, format!("bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != d + d * d {
        return Err(parse_err(n, format!("frame needs {} numbers", d + d * d)));
    }
    let frame = Frame { origin: vals[..d].to_vec(), axes: vals[d..].chunks(d).map(|c| c.to_vec()).collect() };
    let (n, params_line) = lines.next().ok_or_else(|| parse_err(n + 1, "missing params"))?;
    let p: Vec<f64> = params_line
        .strip_prefix("params")
        .ok_or_else(|| parse_err(n, "expected `params`"))?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(n, format!("bad number `{t}`"))))
        .collect::<Result<_, _>>()?;
    if p.len() != 2 {
        return Err(parse_err(n, "expected `params <min_side> <c_w>`"));
    }

    let mut rows = Vec::new();
    for (n, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != d + 5 {
            return Err(parse_err(n, format!("expected {} fields, found {}", d + 5, t.len())));
        }
        let id: usize = t[0].parse().map_err(|_| parse_err(n, "bad cube id"))?;
        if id != rows.len() {
            return Err(parse_err(n, format!("cube ids must be consecutive; expected {}", rows.len())));
        }
        let level: i32 = t[1].parse().map_err(|_| parse_err(n, "bad level"))?;
        let index: Vec<i64> =
            t[2..2 + d].iter().map(|v| v.parse().map_err(|_| parse_err(n, "bad index"))).collect::<Result<_, _>>()?;
        let flag = match t[2 + d] {
            "C" => 'C',
            "P" => 'P',
            "U" => 'U',
            other => return Err(parse_err(n, format!("unknown flag `{other}`"))),
        };
        let parent = match t[3 + d] {
            "-" => None,
            v => Some(v.parse().map_err(|_| parse_err(n, "bad parent id"))?),
        };
        let canvases = match t[4 + d] {
            "-" => Vec::new(),
            v => v.split(',').map(|x| x.parse().map_err(|_| parse_err(n, "bad window id"))).collect::<Result<_, _>>()?,
        };
        rows.push((n, Row { cube: Cube::new(level, index), flag, parent, canvases }));
    }

    let mut cov = build_covering_in(domain, &frame, p[0], p[1])?;
    if cov.len() != rows.len() {
        return Err(parse_err(0, format!("dump has {} cubes, construction gives {}", rows.len(), cov.len())));
    }
    let oriented = rows.iter().any(|(_, r)| r.flag != 'U');
    if oriented {
        cov.orient()?;
    }
    for (i, (n, row)) in rows.iter().enumerate() {
        if cov.cubes[i] != row.cube {
            return Err(parse_err(*n, format!("cube {} does not match construction", row.cube)));
        }
        if let Some(o) = cov.orientation.as_ref() {
            let flag = if o.central[i] { 'C' } else { 'P' };
            if flag != row.flag || o.parent[i] != row.parent || o.canvases[i] != row.canvases {
                return Err(parse_err(*n, "orientation does not match construction"));
            }
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_disk;
    use crate::whitney::build_covering;

    #[test]
    fn round_trip() {
        let disk = make_disk(1.0).unwrap();
        let mut cov = build_covering(&disk, 2f64.powi(-4), 1.0).unwrap();
        cov.orient().unwrap();
        let text = dump_covering(&cov);
        let back = load_covering(&disk, &text).unwrap();
        assert_eq!(back.cubes, cov.cubes);
        assert_eq!(dump_covering(&back), text);
    }

    #[test]
    fn reports_line_numbers() {
        let disk = make_disk(1.0).unwrap();
        let err = load_covering(&disk, "czsob-covering 1\ndim 2\nframe 0 0 1 0 0 1\nparams x 1\n").unwrap_err();
        assert!(matches!(err, WhitneyError::Parse { line: 4, .. }), "{err:?}");
        assert!(matches!(load_covering(&disk, "nope"), Err(WhitneyError::Parse { line: 1, .. })));
    }
}

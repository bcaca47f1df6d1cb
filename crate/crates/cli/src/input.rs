use std::path::Path;

use shiftstable::corpus;
use shiftstable::graph::{CausalGraph, Edge};
use shiftstable::io::{parse_graph, parse_scm};
use shiftstable::scm::LinearGaussianScm;

use crate::{Failure, GraphSource, ModelSource};

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: shiftstable::Error) -> Failure {
    match Failure::from(e) {
        Failure::Parse(m) => Failure::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// The graph and a label naming where it came from.
pub fn load_graph(src: &GraphSource) -> Result<(CausalGraph, String), Failure> {
    match (&src.graph, &src.preset) {
        (Some(p), None) => Ok((
            parse_graph(&read(p)?).map_err(|e| with_path(p, e))?,
            p.display().to_string(),
        )),
        (None, Some(name)) => corpus::by_name(name)
            .map(|g| (g, format!("preset:{name}")))
            .ok_or_else(|| {
                Failure::Usage(format!(
                    "unknown preset `{name}`; expected one of {}",
                    corpus::NAMES.join(", ")
                ))
            }),
        _ => Err(Failure::Usage(
            "give exactly one of --graph or --preset".into(),
        )),
    }
}

pub const MODEL_PRESETS: [&str; 2] = ["triangle", "random-triangle"];

/// The model and a label naming where it came from.
pub fn load_model(
    src: &ModelSource,
    seed: Option<u64>,
) -> Result<(LinearGaussianScm, String), Failure> {
    match (&src.scm, src.preset.as_deref()) {
        (Some(p), None) => Ok((
            parse_scm(&read(p)?).map_err(|e| with_path(p, e))?,
            p.display().to_string(),
        )),
        (None, Some("triangle")) => Ok((
            corpus::triangle_scm(5.0, 1.0, 1.0),
            "preset:triangle".into(),
        )),
        (None, Some("random-triangle")) => {
            let seed =
                seed.ok_or_else(|| Failure::Usage("preset `random-triangle` needs --seed".into()))?;
            Ok((
                corpus::preset_triangle(seed),
                format!("preset:random-triangle:{seed}"),
            ))
        }
        (None, Some(name)) => Err(Failure::Usage(format!(
            "unknown model preset `{name}`; expected one of {}",
            MODEL_PRESETS.join(", ")
        ))),
        _ => Err(Failure::Usage(
            "give exactly one of --scm or --preset".into(),
        )),
    }
}

/// Inclusive evenly spaced grid from `lo:hi:steps`; a single number is a one-point grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("grid `{s}` must be `lo:hi:steps` with steps >= 1"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().ok().filter(|v| v.is_finite());
    match parts.as_slice() {
        [v] => Ok(vec![num(v).ok_or_else(bad)?]),
        [lo, hi, steps] => {
            let (lo, hi) = (num(lo).ok_or_else(bad)?, num(hi).ok_or_else(bad)?);
            let steps: usize = steps.parse().map_err(|_| bad())?;
            match steps {
                0 => Err(bad()),
                1 => Ok(vec![lo]),
                n => Ok((0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()),
            }
        }
        _ => Err(bad()),
    }
}

/// `A->B` or `A<->B`.
pub fn parse_edge(s: &str) -> Result<Edge, Failure> {
    if let Some((a, b)) = s.split_once("<->") {
        return Ok(Edge::bidirected(a.trim(), b.trim()));
    }
    if let Some((a, b)) = s.split_once("->") {
        return Ok(Edge::directed(a.trim(), b.trim()));
    }
    Err(Failure::Usage(format!(
        "edge `{s}` must look like `A->B` or `A<->B`"
    )))
}

/// `A->B=0.5`.
pub fn parse_assignment(s: &str) -> Result<(Edge, f64), Failure> {
    let (e, v) = s
        .rsplit_once('=')
        .ok_or_else(|| Failure::Usage(format!("coefficient `{s}` must look like `A->B=0.5`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("bad coefficient value in `{s}`")))?;
    Ok((parse_edge(e)?, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1:4:4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
        let g = parse_grid("1:4:50").unwrap();
        assert_eq!((g.len(), g[0], g[49]), (50, 1.0, 4.0));
        for bad in ["1:4:0", "1:4", "a:b:c", "1:inf:3", ""] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn edges() {
        assert_eq!(parse_edge("Y->X").unwrap(), Edge::directed("Y", "X"));
        assert_eq!(parse_edge(" A <-> B ").unwrap(), Edge::bidirected("A", "B"));
        assert!(parse_edge("A-B").is_err());
        assert_eq!(parse_assignment("Y->X=-2.5").unwrap().1, -2.5);
    }
}

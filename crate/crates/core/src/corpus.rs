//! Small named graphs and models used in examples, tests and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{CausalGraph, Edge, Node};
use crate::scm::{LinearGaussianScm, DEFAULT_NOISE_VAR};

/// Hospital triage: the admission policy `Asthma -> ICU` varies between sites.
pub fn pneumonia() -> CausalGraph {
    pneumonia_with(true)
}

pub fn pneumonia_with(icu_observed: bool) -> CausalGraph {
    let icu = if icu_observed {
        Node::observed("ICU")
    } else {
        Node::latent("ICU")
    };
    CausalGraph::new(
        vec![
            Node::observed("Asthma"),
            icu,
            Node::observed("Pneumonia"),
            Node::observed("Mortality"),
        ],
        vec![
            (Edge::directed("Asthma", "ICU"), true),
            (Edge::directed("Asthma", "Pneumonia"), false),
            (Edge::directed("Asthma", "Mortality"), false),
            (Edge::directed("ICU", "Mortality"), false),
            (Edge::directed("Pneumonia", "Mortality"), false),
        ],
        "Mortality",
    )
    .expect("valid graph")
}

/// Latent department `W` shifts image style `X`; `Z` depends on `Y` and `X`.
pub fn style_shift() -> CausalGraph {
    CausalGraph::new(
        vec![
            Node::observed("X"),
            Node::observed("Y"),
            Node::observed("Z"),
            Node::latent("W"),
        ],
        vec![
            (Edge::directed("W", "X"), true),
            (Edge::directed("W", "Y"), false),
            (Edge::directed("Y", "Z"), false),
            (Edge::directed("X", "Z"), false),
        ],
        "Y",
    )
    .expect("valid graph")
}

/// `X -> Y`, unstable `Y -> Z`, and a stable confounder `Y <-> Z`.
pub fn confounded_child() -> CausalGraph {
    CausalGraph::new(
        vec![
            Node::observed("X"),
            Node::observed("Y"),
            Node::observed("Z"),
        ],
        vec![
            (Edge::directed("X", "Y"), false),
            (Edge::directed("Y", "Z"), true),
            (Edge::bidirected("Y", "Z"), false),
        ],
        "Y",
    )
    .expect("valid graph")
}

/// Unstable `Y -> X`, stable `Y -> Z` and `X -> Z`.
pub fn triangle() -> CausalGraph {
    CausalGraph::new(
        vec![
            Node::observed("Y"),
            Node::observed("X"),
            Node::observed("Z"),
        ],
        vec![
            (Edge::directed("Y", "X"), true),
            (Edge::directed("Y", "Z"), false),
            (Edge::directed("X", "Z"), false),
        ],
        "Y",
    )
    .expect("valid graph")
}

/// The triangle with the given coefficients and noise variance 0.01 everywhere.
pub fn triangle_scm(lyx: f64, lyz: f64, lxz: f64) -> LinearGaussianScm {
    LinearGaussianScm::with_noise(
        triangle(),
        vec![
            (Edge::directed("Y", "X"), lyx),
            (Edge::directed("Y", "Z"), lyz),
            (Edge::directed("X", "Z"), lxz),
        ],
        DEFAULT_NOISE_VAR,
    )
    .expect("valid model")
}

/// Random triangle: `|λ_yx| ~ U(2, 4)`, `|λ_yz|, |λ_xz| ~ U(0.1, 2)`, random signs.
pub fn preset_triangle(seed: u64) -> LinearGaussianScm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signed = |lo: f64, hi: f64| {
        let m = rng.random_range(lo..hi);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let lyx = signed(2.0, 4.0);
    let lyz = signed(0.1, 2.0);
    let lxz = signed(0.1, 2.0);
    triangle_scm(lyx, lyz, lxz)
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = ["pneumonia", "style-shift", "confounded-child", "triangle"];

pub fn by_name(name: &str) -> Option<CausalGraph> {
    match name {
        "pneumonia" => Some(pneumonia()),
        "style-shift" => Some(style_shift()),
        "confounded-child" => Some(confounded_child()),
        "triangle" => Some(triangle()),
        _ => None,
    }
}

/// Every named graph.
pub fn all() -> Vec<(&'static str, CausalGraph)> {
    NAMES
        .iter()
        .map(|&n| (n, by_name(n).expect("listed name")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_ranges_and_determinism() {
        for seed in 0..50 {
            let m = preset_triangle(seed);
            let get = |t: &str, h: &str| m.coefficient(&Edge::directed(t, h)).unwrap().abs();
            assert!((2.0..4.0).contains(&get("Y", "X")));
            assert!((0.1..2.0).contains(&get("Y", "Z")));
            assert!((0.1..2.0).contains(&get("X", "Z")));
            assert_eq!(m.noise_var("Y"), Some(0.01));
        }
        assert_eq!(
            preset_triangle(3).coefficients(),
            preset_triangle(3).coefficients()
        );
    }

    #[test]
    fn named_graphs_resolve() {
        for (name, g) in all() {
            assert!(by_name(name).unwrap().same_structure(&g));
        }
        assert!(by_name("nope").is_none());
    }
}

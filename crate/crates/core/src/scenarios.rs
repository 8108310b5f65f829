//! The worked examples bundled with the command line tool.

use nalgebra::DMatrix;

use crate::constructors::{two_layer_model, DynamicalSpec};
use crate::intervention::Intervention;
use crate::noise::{Distribution, NoiseModel};
use crate::sem::Sem;
use crate::transform::{InterventionMap, Transformation};

pub use crate::sem::lightbulbs;

/// A candidate transformation `(M_X, M_Y, τ, ω)`.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub source: Sem,
    pub target: Sem,
    pub tau: Transformation,
    pub omega: InterventionMap,
}

const N01: Distribution = Distribution::Normal { mean: 0.0, var: 1.0 };

fn wrong_pair(second: bool) -> Candidate {
    let mut bx = Sem::builder().noise("U1", N01).noise("U3", N01);
    bx = if second {
        bx.noise("U2", N01).exo("E1", "1").exo("E2", "U2")
    } else {
        bx.exo("E1", "U1").exo("E2", "-U1")
    };
    let source = bx
        .exo("E3", "U3")
        .var("X1", "E1")
        .var("X2", "E2")
        .var("X3", "X1 + X2 + E3")
        .intervention(Intervention::new([("X2", 0.0)]))
        .intervention(Intervention::new([("X1", 0.0), ("X2", 0.0)]))
        .build()
        .expect("valid model");
    let mut by = Sem::builder()
        .exo_dist("F1", N01)
        .exo_dist("F2", N01)
        .var("Y1", if second { "1 + F1" } else { "F1" })
        .var("Y2", "Y1 + F2")
        .intervention(Intervention::new([("Y1", 0.0)]));
    if second {
        by = by.intervention(Intervention::new([("Y1", 1.0)]));
    }
    let target = by.build().expect("valid model");
    let tau = Transformation::parse(source.names(), target.names(), &["X1 + X2", "X3"]).expect("valid map");
    let d0 = Intervention::null();
    let d2 = Intervention::new([("X2", 0.0)]);
    let d12 = Intervention::new([("X1", 0.0), ("X2", 0.0)]);
    let y0 = Intervention::new([("Y1", 0.0)]);
    let y1 = Intervention::new([("Y1", 1.0)]);
    let omega = if second {
        InterventionMap::explicit([(d0.clone(), d0), (d2, y1), (d12, y0)])
    } else {
        InterventionMap::explicit([(d0, y0.clone()), (d2, Intervention::null()), (d12, y0)])
    };
    Candidate {
        source,
        target,
        tau,
        omega,
    }
}

/// `E2 = −E1`: every law matches but `ω(∅) ≠ ∅` breaks the order.
pub fn wrong1() -> Candidate {
    wrong_pair(false)
}

/// `E1 = 1`: every law matches but `ω` reverses `do(X2=0) ≤ do(X1=0, X2=0)`.
pub fn wrong2() -> Candidate {
    wrong_pair(true)
}

/// Two W and two Z variables with `A = [[1, 3], [3, 1]]`.
pub fn micro_macro() -> Sem {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
    let e = [
        Distribution::Normal { mean: 1.0, var: 1.0 },
        Distribution::Normal { mean: -1.0, var: 2.0 },
    ];
    let f = [N01, Distribution::Normal { mean: 0.5, var: 0.25 }];
    two_layer_model(&a, &e, &f).expect("valid model")
}

/// `A = [[0.5, 0.2], [0.1, 0.3]]` with standard normal noise and every
/// clamp set.
pub fn dynamics() -> DynamicalSpec {
    let vars = vec!["Y1".to_string(), "Y2".to_string()];
    let noise = NoiseModel::independent([
        ("E1".to_string(), "u_E1".to_string(), N01),
        ("E2".to_string(), "u_E2".to_string(), N01),
    ])
    .expect("valid noise");
    let catalog = DynamicalSpec::all_clamps(&vars).expect("valid catalog");
    DynamicalSpec::new(vars, DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.1, 0.3]), noise, catalog).expect("valid spec")
}

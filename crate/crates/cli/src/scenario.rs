//! Built-in scenarios: ready-made inputs for every command.

use netfactor::network::{canonical_instance, CanonicalInstance};
use netfactor::search::{square_cross_task, square_network};
use netfactor::sim::{ternary_cross_protocol, MeasurementOutcome, Normalization, ProtocolStep, SubsystemSpec};
use netfactor::task::{cross_pairs_task, subset_state_task, typewriter_matrix, typewriter_task, SubsetKind};
use netfactor::verify::{bundled_assignment, BundledAssignment};
use netfactor::{DenseTensor, DistributionTask, Domain, Error, Network, NodeAssignment, Result, Scalar};

#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub network: Option<Network>,
    pub task: Option<DistributionTask>,
    pub assignment: Option<NodeAssignment>,
    pub protocol: Option<Vec<ProtocolStep>>,
    pub matrix: Option<DenseTensor>,
}

pub const SCENARIOS: &[(&str, &str)] = &[
    ("butterfly", "butterfly network, crossing task, parity assignment"),
    ("typewriter", "4-letter noisy typewriter over a channel with inner dimension 3"),
    ("square", "2x2 square network, crossing Bell pairs"),
    ("ternary-cross", "ternary square, crossing Bell pairs, assignment and protocol"),
    ("star-ghz:N", "star with N qubit clients, GHZ task, delta assignment"),
    ("identity:N", "N x N identity matrix"),
    ("measure-demo", "computational-basis measurement of one half of a Bell pair"),
];

fn count_arg(name: &str, arg: Option<&str>) -> Result<usize> {
    arg.and_then(|a| a.parse().ok())
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

fn measure_demo() -> Vec<ProtocolStep> {
    let projector = |k: usize| {
        let mut m = vec![vec![Scalar::new(0.0, 0.0); 2]; 2];
        m[k][k] = Scalar::new(1.0, 0.0);
        m
    };
    let one = Scalar::new(1.0, 0.0);
    let zero = Scalar::new(0.0, 0.0);
    vec![
        ProtocolStep::Prepare {
            node: "u".into(),
            subsystems: vec![SubsystemSpec::new("kept", 2), SubsystemSpec::new("sent", 2)],
            amplitudes: vec![one, zero, zero, one],
        },
        ProtocolStep::Send {
            subsystem: "sent".into(),
            from: "u".into(),
            to: "v".into(),
        },
        ProtocolStep::Measure {
            node: "u".into(),
            key: "z".into(),
            inputs: vec!["kept".into()],
            outputs: vec![SubsystemSpec::new("kept", 2)],
            operators: (0..2)
                .map(|k| MeasurementOutcome {
                    outcome: k.to_string(),
                    matrix: projector(k),
                })
                .collect(),
            normalization: Normalization::AsGiven,
        },
    ]
}

pub fn scenario(name: &str) -> Result<Scenario> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    Ok(match head {
        "butterfly" => Scenario {
            network: Some(canonical_instance(CanonicalInstance::Butterfly)?),
            task: Some(cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[2, 2], Domain::NonNegative)?),
            assignment: Some(bundled_assignment(BundledAssignment::ButterflyXor)?),
            ..Default::default()
        },
        "typewriter" => Scenario {
            network: Some(canonical_instance(CanonicalInstance::Channel {
                left: 4,
                inner: 3,
                right: 4,
            })?),
            task: Some(typewriter_task()),
            matrix: Some(typewriter_matrix()),
            ..Default::default()
        },
        "square" => Scenario {
            network: Some(square_network()),
            task: Some(square_cross_task()),
            ..Default::default()
        },
        "ternary-cross" => Scenario {
            network: Some(canonical_instance(CanonicalInstance::TernarySquare)?),
            task: Some(cross_pairs_task(&[("a", "d"), ("b", "c")], &[2, 2], Domain::Complex)?),
            assignment: Some(bundled_assignment(BundledAssignment::TernarySquareCross { x: 0 })?),
            protocol: Some(ternary_cross_protocol()),
            ..Default::default()
        },
        "star-ghz" => {
            let n = count_arg(name, arg)?;
            Scenario {
                network: Some(canonical_instance(CanonicalInstance::Star { n, dim: 2 })?),
                task: Some(subset_state_task(&SubsetKind::Ghz { n, d: 2 }, Domain::Complex)?),
                assignment: Some(bundled_assignment(BundledAssignment::StarGhz { n, d: 2 })?),
                ..Default::default()
            }
        }
        "identity" => {
            let n = count_arg(name, arg)?;
            Scenario {
                matrix: Some(DenseTensor::delta(&["u", "v"], n)?),
                ..Default::default()
            }
        }
        "measure-demo" => Scenario {
            network: Some(canonical_instance(CanonicalInstance::SingleEdge { dim: 2 })?),
            protocol: Some(measure_demo()),
            ..Default::default()
        },
        _ => return Err(Error::UnknownName(name.to_string())),
    })
}

//! Forward evaluation of built networks, output truncation, and the
//! membership test for the norm-bounded hypothesis space `H_{R,N}`.

use serde::{Deserialize, Serialize};

use crate::bounds::bias_bound_log;
use crate::error::{Error, Result};
use crate::netbuild::NetworkSpec;
use crate::ridge::euclid_norm;
use crate::sequences::{apply_layer, relu};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    /// `h^(1), ..., h^(J₂)` when captured.
    pub activations: Option<Vec<Vec<f64>>>,
    /// `h^(J₂+1)`.
    pub features: Vec<f64>,
    pub output: f64,
    /// `|x| > 1`; guarantees only cover the unit ball.
    pub outside_ball: bool,
}

/// Last convolutional activation `h^(J₂)(x)`, optionally keeping every layer.
fn conv_stack(spec: &NetworkSpec, x: &[f64], mut keep: Option<&mut Vec<Vec<f64>>>) -> Result<Vec<f64>> {
    if x.len() != spec.d {
        return Err(Error::Dimension {
            expected: spec.d,
            got: x.len(),
        });
    }
    let mut h = x.to_vec();
    for layer in &spec.layers {
        h = apply_layer(layer, &h, spec.d)?;
        if let Some(k) = keep.as_deref_mut() {
            k.push(h.clone());
        }
    }
    Ok(h)
}

/// `h^(J₂+1) = σ(F h^(J₂) - b^(J₂+1))`.
fn fc_features(spec: &NetworkSpec, h: &[f64]) -> Result<Vec<f64>> {
    spec.fc_bias
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let row = spec.fc.row(i);
            if row.len() != h.len() {
                return Err(Error::Dimension {
                    expected: row.len(),
                    got: h.len(),
                });
            }
            Ok(relu(row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() - b))
        })
        .collect()
}

pub fn forward(spec: &NetworkSpec, x: &[f64], capture: bool) -> Result<EvalTrace> {
    let mut kept = capture.then(Vec::new);
    let h = conv_stack(spec, x, kept.as_mut())?;
    let features = fc_features(spec, &h)?;
    if features.len() != spec.c.len() {
        return Err(Error::Dimension {
            expected: spec.c.len(),
            got: features.len(),
        });
    }
    let output = spec.c.iter().zip(&features).map(|(c, v)| c * v).sum();
    Ok(EvalTrace {
        activations: kept,
        features,
        output,
        outside_ball: euclid_norm(x) > 1.0 + 1e-12,
    })
}

/// Network output `c·h^(J₂+1)(x)`.
pub fn output(spec: &NetworkSpec, x: &[f64]) -> Result<f64> {
    Ok(forward(spec, x, false)?.output)
}

/// `h^(J₂+1)(x)`, the inputs of the output coefficients.
pub fn features(spec: &NetworkSpec, x: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(spec, x, false)?.features)
}

/// `Q̂(x) = F h^(J₂)(x) + Q(0)` using the first fully connected row.
pub fn q_hat(spec: &NetworkSpec, x: &[f64]) -> Result<f64> {
    let h = conv_stack(spec, x, None)?;
    Ok(spec.fc.row(0).iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + spec.meta.q0)
}

/// Clamp to `[-M, M]`.
pub fn truncate(y: f64, m: f64) -> f64 {
    y.clamp(-m, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `measured` and `bound` are natural logarithms.
    pub log_domain: bool,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

impl MembershipReport {
    pub fn check(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn le_check(name: &str, measured: f64, bound: f64, log_domain: bool, detail: String) -> ConstraintCheck {
    ConstraintCheck {
        name: name.into(),
        measured,
        bound,
        log_domain,
        pass: measured <= bound,
        detail,
    }
}

/// Checks every `H_{R,N}` constraint against the stored parameters.
pub fn check_membership(spec: &NetworkSpec, r: f64) -> MembershipReport {
    let s = spec.s;
    let nf = spec.n as f64;
    let mut checks = Vec::new();

    let (worst_filter, filter_at) = spec
        .layers
        .iter()
        .enumerate()
        .map(|(j, l)| (l.filter.sup_norm(), j + 1))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    checks.push(le_check("filter_sup", worst_filter, r, false, format!("layer {filter_at}")));

    // Worst slack of log‖b^(j)‖_∞ against j·log(2(s+1)R) over all layers,
    // including the fully connected one at j = J₂+1.
    let bias_norms = spec
        .layers
        .iter()
        .map(|l| l.bias.iter().fold(0.0f64, |m, b| m.max(b.abs())))
        .chain(std::iter::once(spec.fc_bias.iter().fold(0.0f64, |m, b| m.max(b.abs()))));
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0);
    for (j, norm) in bias_norms.enumerate() {
        let lhs = norm.ln();
        let rhs = bias_bound_log(j + 1, s, r);
        if lhs - rhs > worst.0 {
            worst = (lhs - rhs, lhs, rhs, j + 1);
        }
    }
    checks.push(le_check("bias_log", worst.1, worst.2, true, format!("layer {}", worst.3)));

    let c_sup = spec.c.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    checks.push(le_check("c_sup", c_sup, nf * r, false, String::new()));
    checks.push(le_check("fc_row_l1", spec.fc.max_row_l1(), nf * nf * r, false, String::new()));

    let identical = spec.fc.rows_identical();
    checks.push(ConstraintCheck {
        name: "fc_identical_rows".into(),
        measured: f64::from(u8::from(identical)),
        bound: 1.0,
        log_domain: false,
        pass: identical,
        detail: String::new(),
    });

    let restricted = spec.j2.saturating_sub(1);
    let bad: Vec<usize> = spec.layers[..restricted]
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.has_equal_middle_bias())
        .map(|(j, _)| j + 1)
        .collect();
    checks.push(ConstraintCheck {
        name: "middle_bias_equal".into(),
        measured: bad.len() as f64,
        bound: 0.0,
        log_domain: false,
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            String::new()
        } else {
            format!("layers {bad:?}")
        },
    });

    let pass = checks.iter().all(|c| c.pass);
    MembershipReport { r, checks, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::radius_for;
    use crate::netbuild::{build_radial_network, FcWeights, FunctionDescriptor, TargetFunction};
    use crate::sequences::{ConvLayerSpec, Filter};

    fn ident() -> TargetFunction {
        TargetFunction::from_descriptor(FunctionDescriptor::Identity, 0.0, 1.0).unwrap()
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(truncate(1.5, 1.0), 1.0);
        assert_eq!(truncate(-3.0, 1.0), -1.0);
        assert_eq!(truncate(0.2, 1.0), 0.2);
    }

    #[test]
    fn zero_network() {
        let mut spec = build_radial_network(&ident(), 2, 2, 1).unwrap();
        let mut width = 2;
        for l in spec.layers.iter_mut() {
            *l = ConvLayerSpec {
                filter: Filter::padded(&[1.0], 3),
                bias: vec![0.0; width + 2],
                downsample_after: false,
            };
            width += 2;
        }
        spec.c.iter_mut().for_each(|c| *c = 0.0);
        for x in [[0.0, 0.0], [0.3, -0.9], [1.0, 0.0]] {
            assert_eq!(output(&spec, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn radial_origin() {
        let spec = build_radial_network(&ident(), 2, 2, 4).unwrap();
        let y = output(&spec, &[0.0, 0.0]).unwrap();
        assert!(y.abs() <= 3.0 * 9.0 / 4.0);
        assert!(y.abs() < 1e-9);
    }

    #[test]
    fn homogeneous_in_c() {
        let mut spec = build_radial_network(&ident(), 2, 2, 3).unwrap();
        let x = [0.4, -0.3];
        let y = output(&spec, &x).unwrap();
        spec.c.iter_mut().for_each(|c| *c *= 4.0);
        assert_eq!(output(&spec, &x).unwrap(), 4.0 * y);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = build_radial_network(&ident(), 2, 2, 1).unwrap();
        assert!(forward(&spec, &[0.1, 0.2, 0.3], false).is_err());
        let t = forward(&spec, &[2.0, 0.0], true).unwrap();
        assert!(t.outside_ball);
        assert_eq!(t.activations.unwrap().len(), spec.j2);
    }

    #[test]
    fn membership_and_violations() {
        let spec = build_radial_network(&ident(), 4, 2, 8).unwrap();
        let r = radius_for(&spec);
        let rep = check_membership(&spec, r);
        assert!(rep.pass, "{rep:?}");

        let mut bad = spec.clone();
        let f = bad.layers[3].filter.clone();
        bad.layers[3].filter = f.scaled(10.0 * r / f.sup_norm());
        let rep = check_membership(&bad, r);
        assert!(!rep.check("filter_sup").unwrap().pass);
        assert!(!rep.pass);

        let mut bad = spec.clone();
        let row = bad.fc.row(0).to_vec();
        let mut rows = vec![row; bad.fc_bias.len()];
        rows[2][0] += 1.0;
        bad.fc = FcWeights::Rows(rows);
        let rep = check_membership(&bad, r);
        assert!(!rep.check("fc_identical_rows").unwrap().pass);
        assert!(rep.check("filter_sup").unwrap().pass);

        let mut bad = spec.clone();
        bad.layers[1].bias[4] += 1.0;
        assert!(!check_membership(&bad, r).check("middle_bias_equal").unwrap().pass);

        let mut bad = spec.clone();
        bad.c[0] = 2.0 * 8.0 * r;
        assert!(!check_membership(&bad, r).check("c_sup").unwrap().pass);

        let mut bad = spec;
        bad.layers[0].bias[0] = 1e3 * 2.0 * 3.0 * r;
        assert!(!check_membership(&bad, r).check("bias_log").unwrap().pass);
    }
}

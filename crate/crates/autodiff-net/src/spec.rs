//! Declarative network descriptions: serializable layer specs, shape
//! inference, and coefficient counting.

use crate::error::{NetError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Flatten,
    /// Fixed scattering front-end; only valid as the first layer.
    Scattering {
        j: usize,
        l: usize,
        max_order: u8,
    },
    Dense {
        width: usize,
    },
    Trl {
        output: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ranks: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKindSpec {
    Scalar,
    Distributional {
        atoms: usize,
        v_min: f64,
        v_max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSpec {
    Dense,
    Trl { rank: usize },
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Dense
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub kind: HeadKindSpec,
    #[serde(default)]
    pub dueling: bool,
    #[serde(default)]
    pub value: MapSpec,
    #[serde(default)]
    pub advantage: MapSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub head: HeadSpec,
}

/// Maps a scalar rank constraint onto per-mode Tucker ranks:
/// `(min(r, I_1), ..., min(r, I_{N-1}), min(r, output))`.
pub fn scalar_rank_to_ranks(rank: usize, input_modes: &[usize], output: usize) -> Vec<usize> {
    let mut ranks: Vec<usize> = input_modes.iter().map(|&m| rank.min(m)).collect();
    ranks.push(rank.min(output));
    ranks
}

pub(crate) fn resolve_trl_ranks(
    rank: Option<usize>,
    ranks: &Option<Vec<usize>>,
    input_modes: &[usize],
    output: usize,
) -> Result<Vec<usize>> {
    let resolved = match (rank, ranks) {
        (Some(r), None) => {
            if r == 0 {
                return Err(NetError::Spec("trl rank must be >= 1".into()));
            }
            scalar_rank_to_ranks(r, input_modes, output)
        }
        (None, Some(rs)) => rs.clone(),
        _ => {
            return Err(NetError::Spec(
                "trl needs exactly one of `rank` or `ranks`".into(),
            ))
        }
    };
    if resolved.len() != input_modes.len() + 1 {
        return Err(NetError::Spec(format!(
            "trl with input modes {:?} needs {} ranks, got {}",
            input_modes,
            input_modes.len() + 1,
            resolved.len()
        )));
    }
    for (k, (&r, &extent)) in resolved
        .iter()
        .zip(input_modes.iter().chain(std::iter::once(&output)))
        .enumerate()
    {
        if r == 0 || r > extent {
            return Err(NetError::Spec(format!(
                "trl rank {r} invalid for extent {extent} at mode {k}"
            )));
        }
    }
    Ok(resolved)
}

/// Per-sample feature shape after each layer, starting from `input_shape`
/// (without the batch mode).
pub fn infer_shapes(spec: &NetworkSpec, input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = vec![input_shape.to_vec()];
    let mut current = input_shape.to_vec();
    for (idx, layer) in spec.layers.iter().enumerate() {
        current = match layer {
            LayerSpec::Conv {
                channels,
                kernel,
                stride,
            } => {
                if current.len() != 3 {
                    return Err(NetError::Spec(format!(
                        "layer {idx}: conv needs (c, h, w) input, got {current:?}"
                    )));
                }
                if current[1] < *kernel || current[2] < *kernel {
                    return Err(NetError::Spec(format!(
                        "layer {idx}: kernel {kernel} larger than {current:?}"
                    )));
                }
                vec![
                    *channels,
                    (current[1] - kernel) / stride + 1,
                    (current[2] - kernel) / stride + 1,
                ]
            }
            LayerSpec::Relu => current,
            LayerSpec::Flatten => vec![current.iter().product()],
            LayerSpec::Scattering { j, l, max_order } => {
                if idx != 0 {
                    return Err(NetError::Spec(
                        "scattering front-end must be the first layer".into(),
                    ));
                }
                if current.len() != 3 {
                    return Err(NetError::Spec(format!(
                        "scattering needs (c, h, w) input, got {current:?}"
                    )));
                }
                let cfg = scattering::ScatteringConfig {
                    j: *j,
                    l: *l,
                    max_order: *max_order,
                    height: current[1],
                    width: current[2],
                };
                cfg.validate()?;
                vec![
                    current[0] * cfg.paths_per_channel(),
                    cfg.output_height(),
                    cfg.output_width(),
                ]
            }
            LayerSpec::Dense { width } => vec![*width],
            LayerSpec::Trl { output, rank, ranks } => {
                resolve_trl_ranks(*rank, ranks, &current, *output)?;
                vec![*output]
            }
        };
        shapes.push(current.clone());
    }
    if current.len() != 1 {
        return Err(NetError::Spec(format!(
            "head needs flat features, got {current:?} (missing flatten?)"
        )));
    }
    Ok(shapes)
}

/// One row of a coefficient report.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCount {
    pub name: String,
    pub params: usize,
    /// Coefficients of the dense layer this one replaces (differs from
    /// `params` only for factored layers).
    pub dense_equivalent: usize,
    /// True for the fully-connected / factored stack the compression targets
    /// (dense, trl, head maps); false for conv and fixed front-ends.
    pub linear: bool,
}

/// Coefficient accounting per layer plus totals. `linear_total` covers the
/// replaceable linear stack the rank presets compress.
#[derive(Debug, Clone, Serialize)]
pub struct ParamCountReport {
    pub layers: Vec<LayerCount>,
    pub total: usize,
    pub dense_equivalent_total: usize,
    pub linear_total: usize,
    pub dense_equivalent_linear_total: usize,
}

impl ParamCountReport {
    /// Dense-over-factored ratio of the linear stack.
    pub fn linear_compression_ratio(&self) -> f64 {
        self.dense_equivalent_linear_total as f64 / self.linear_total as f64
    }
}

/// Counts learnable coefficients for a spec on a given input shape and
/// action count. Scattering front-ends contribute zero.
pub fn count_parameters(
    spec: &NetworkSpec,
    input_shape: &[usize],
    actions: usize,
) -> Result<ParamCountReport> {
    let shapes = infer_shapes(spec, input_shape)?;
    let mut layers = Vec::new();
    for (idx, layer) in spec.layers.iter().enumerate() {
        let in_shape = &shapes[idx];
        let (name, params, dense_equivalent, linear) = match layer {
            LayerSpec::Conv {
                channels,
                kernel,
                stride: _,
            } => {
                let p = channels * in_shape[0] * kernel * kernel + channels;
                (format!("layer{idx}.conv"), p, p, false)
            }
            LayerSpec::Relu => (format!("layer{idx}.relu"), 0, 0, false),
            LayerSpec::Flatten => (format!("layer{idx}.flatten"), 0, 0, false),
            LayerSpec::Scattering { .. } => (format!("layer{idx}.scattering"), 0, 0, false),
            LayerSpec::Dense { width } => {
                let p = width * in_shape.iter().product::<usize>() + width;
                (format!("layer{idx}.dense"), p, p, true)
            }
            LayerSpec::Trl { output, rank, ranks } => {
                let resolved = resolve_trl_ranks(*rank, ranks, in_shape, *output)?;
                let mut w_shape = in_shape.clone();
                w_shape.push(*output);
                let p = decomp::tucker_param_count(&w_shape, &resolved) + output;
                let dense = in_shape.iter().product::<usize>() * output + output;
                (format!("layer{idx}.trl"), p, dense, true)
            }
        };
        layers.push(LayerCount {
            name,
            params,
            dense_equivalent,
            linear,
        });
    }

    let features = shapes.last().expect("at least input shape")[0];
    let (value_out, adv_out) = match spec.head.kind {
        HeadKindSpec::Scalar => (1usize, actions),
        HeadKindSpec::Distributional { atoms, .. } => (atoms, actions * atoms),
    };
    if spec.head.dueling {
        layers.push(map_count("head.value", &spec.head.value, features, value_out));
    }
    layers.push(map_count(
        if spec.head.dueling {
            "head.advantage"
        } else {
            "head.output"
        },
        &spec.head.advantage,
        features,
        adv_out,
    ));

    let total = layers.iter().map(|l| l.params).sum();
    let dense_equivalent_total = layers.iter().map(|l| l.dense_equivalent).sum();
    let linear_total = layers.iter().filter(|l| l.linear).map(|l| l.params).sum();
    let dense_equivalent_linear_total = layers
        .iter()
        .filter(|l| l.linear)
        .map(|l| l.dense_equivalent)
        .sum();
    Ok(ParamCountReport {
        layers,
        total,
        dense_equivalent_total,
        linear_total,
        dense_equivalent_linear_total,
    })
}

fn map_count(name: &str, map: &MapSpec, features: usize, out: usize) -> LayerCount {
    let dense = features * out + out;
    let params = match map {
        MapSpec::Dense => dense,
        MapSpec::Trl { rank } => {
            let ranks = scalar_rank_to_ranks(*rank, &[features], out);
            decomp::tucker_param_count(&[features, out], &ranks) + out
        }
    };
    LayerCount {
        name: name.to_string(),
        params,
        dense_equivalent: dense,
        linear: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3_like_layers() -> Vec<LayerSpec> {
        vec![
            LayerSpec::Conv {
                channels: 32,
                kernel: 5,
                stride: 5,
            },
            LayerSpec::Relu,
            LayerSpec::Conv {
                channels: 64,
                kernel: 5,
                stride: 5,
            },
            LayerSpec::Relu,
        ]
    }

    #[test]
    fn conv_shape_chain() {
        // 84x84 input, two 5x5 stride-5 convolutions: 16x16 then 3x3
        let spec = NetworkSpec {
            layers: {
                let mut l = table3_like_layers();
                l.push(LayerSpec::Flatten);
                l
            },
            head: HeadSpec {
                kind: HeadKindSpec::Scalar,
                dueling: false,
                value: MapSpec::Dense,
                advantage: MapSpec::Dense,
            },
        };
        let shapes = infer_shapes(&spec, &[4, 84, 84]).unwrap();
        assert_eq!(shapes[1], vec![32, 16, 16]);
        assert_eq!(shapes[3], vec![64, 3, 3]);
        assert_eq!(shapes[5], vec![576]);
    }

    #[test]
    fn dense_count_example() {
        let spec = NetworkSpec {
            layers: vec![LayerSpec::Dense { width: 256 }],
            head: HeadSpec {
                kind: HeadKindSpec::Scalar,
                dueling: false,
                value: MapSpec::Dense,
                advantage: MapSpec::Dense,
            },
        };
        let report = count_parameters(&spec, &[576], 4).unwrap();
        assert_eq!(report.layers[0].params, 147_712);
    }

    #[test]
    fn scattering_front_end_counts_zero() {
        let conv_spec = NetworkSpec {
            layers: vec![
                LayerSpec::Conv {
                    channels: 8,
                    kernel: 3,
                    stride: 1,
                },
                LayerSpec::Flatten,
            ],
            head: HeadSpec {
                kind: HeadKindSpec::Scalar,
                dueling: false,
                value: MapSpec::Dense,
                advantage: MapSpec::Dense,
            },
        };
        let conv_report = count_parameters(&conv_spec, &[2, 16, 16], 3).unwrap();
        assert!(conv_report.layers[0].params > 0);

        let scat_spec = NetworkSpec {
            layers: vec![
                LayerSpec::Scattering {
                    j: 2,
                    l: 4,
                    max_order: 2,
                },
                LayerSpec::Flatten,
            ],
            head: conv_spec.head.clone(),
        };
        let scat_report = count_parameters(&scat_spec, &[2, 16, 16], 3).unwrap();
        assert_eq!(scat_report.layers[0].params, 0);
    }

    #[test]
    fn scattering_must_lead() {
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Scattering {
                    j: 2,
                    l: 4,
                    max_order: 2,
                },
            ],
            head: HeadSpec {
                kind: HeadKindSpec::Scalar,
                dueling: false,
                value: MapSpec::Dense,
                advantage: MapSpec::Dense,
            },
        };
        assert!(infer_shapes(&spec, &[2, 16, 16]).is_err());
    }

    #[test]
    fn scalar_rank_mapping_clamps() {
        assert_eq!(scalar_rank_to_ranks(128, &[64, 3, 3], 256), vec![64, 3, 3, 128]);
        assert_eq!(scalar_rank_to_ranks(48, &[256], 51), vec![48, 48]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = NetworkSpec {
            layers: vec![
                LayerSpec::Conv {
                    channels: 8,
                    kernel: 5,
                    stride: 3,
                },
                LayerSpec::Relu,
                LayerSpec::Trl {
                    output: 64,
                    rank: Some(10),
                    ranks: None,
                },
            ],
            head: HeadSpec {
                kind: HeadKindSpec::Distributional {
                    atoms: 51,
                    v_min: -10.0,
                    v_max: 10.0,
                },
                dueling: true,
                value: MapSpec::Dense,
                advantage: MapSpec::Trl { rank: 48 },
            },
        };
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: NetworkSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}

//! Architecture strings such as `D1176-FC100-FC600-S7` or
//! `I64-C(5,64)-L5-P2-C(5,64)-L3-P2-FC500-FC500-S7`.
//!
//! Grammar (tokens separated by `-`):
//!
//! | token     | meaning                                          |
//! |-----------|--------------------------------------------------|
//! | `D{n}`    | vector input of dimension `n` (first token)      |
//! | `I{s}`    | `s×s` image-sequence input (first token)         |
//! | `C(k,m)`  | convolution, `m` filters of `k×k`, fused ReLU     |
//! | `L{w}`    | local contrast normalization, odd window `w`     |
//! | `P{w}`    | `w×w` max pooling with stride `w`                |
//! | `FC{n}`   | fully connected layer of `n` units, fused ReLU    |
//! | `S{c}`    | softmax classifier over `c` classes (last token) |
//! | `{c}`     | bare class count, same as `S{c}` (last token)    |
//!
//! Convolutions use zero "same" padding and stride 1.

mod persist;

pub use persist::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpec {
    Vector { dim: usize },
    /// `frames` is not part of the string; it is supplied at parse time.
    Image { size: usize, frames: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { kernel: usize, filters: usize },
    Lcn { window: usize },
    Pool { window: usize },
    Dense { units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassifierForm {
    #[default]
    Softmax,
    Bare,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input: InputSpec,
    pub hidden: Vec<LayerSpec>,
    pub classes: usize,
    pub classifier_form: ClassifierForm,
}

/// Input/output extents of one layer of a [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub token: String,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
    pub parameters: usize,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { kernel, filters } => write!(f, "C({kernel},{filters})"),
            LayerSpec::Lcn { window } => write!(f, "L{window}"),
            LayerSpec::Pool { window } => write!(f, "P{window}"),
            LayerSpec::Dense { units } => write!(f, "FC{units}"),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl ModelSpec {
    pub fn render(&self) -> String {
        let mut tokens = vec![match self.input {
            InputSpec::Vector { dim } => format!("D{dim}"),
            InputSpec::Image { size, .. } => format!("I{size}"),
        }];
        tokens.extend(self.hidden.iter().map(|l| l.to_string()));
        tokens.push(match self.classifier_form {
            ClassifierForm::Softmax => format!("S{}", self.classes),
            ClassifierForm::Bare => self.classes.to_string(),
        });
        tokens.join("-")
    }

    pub fn frames(&self) -> Option<usize> {
        match self.input {
            InputSpec::Image { frames, .. } => Some(frames),
            InputSpec::Vector { .. } => None,
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self.input {
            InputSpec::Vector { dim } => vec![dim],
            InputSpec::Image { size, frames } => vec![frames, size, size],
        }
    }

    /// Per-layer shapes; the last entry is the classifier. Errors carry the
    /// 1-based position of the offending token.
    pub fn shapes(&self) -> Result<Vec<LayerShape>> {
        let fail = |position: usize, token: String, reason: String| Error::Arch {
            position,
            token,
            reason,
        };
        let mut current = self.input_shape();
        if current.iter().any(|&e| e == 0) {
            return Err(fail(1, self.render_input(), "extents must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(self.hidden.len() + 1);
        for (i, layer) in self.hidden.iter().enumerate() {
            let position = i + 2;
            let token = layer.to_string();
            let (output, parameters) = match *layer {
                LayerSpec::Conv { kernel, filters } => {
                    if current.len() != 3 {
                        return Err(fail(position, token, "convolution needs an image input".into()));
                    }
                    if kernel == 0 || filters == 0 {
                        return Err(fail(position, token, "kernel and filter count must be >= 1".into()));
                    }
                    (
                        vec![filters, current[1], current[2]],
                        filters * current[0] * kernel * kernel + filters,
                    )
                }
                LayerSpec::Lcn { window } => {
                    if current.len() != 3 {
                        return Err(fail(position, token, "local contrast normalization needs feature maps".into()));
                    }
                    if window % 2 == 0 {
                        return Err(fail(position, token, "window must be odd".into()));
                    }
                    (current.clone(), 0)
                }
                LayerSpec::Pool { window } => {
                    if current.len() != 3 {
                        return Err(fail(position, token, "pooling needs feature maps".into()));
                    }
                    if window == 0 || window > current[1] || window > current[2] {
                        return Err(fail(
                            position,
                            token,
                            format!("window does not fit {}x{} maps", current[1], current[2]),
                        ));
                    }
                    (vec![current[0], current[1] / window, current[2] / window], 0)
                }
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(fail(position, token, "unit count must be >= 1".into()));
                    }
                    let fan_in: usize = current.iter().product();
                    (vec![units], (fan_in + 1) * units)
                }
            };
            out.push(LayerShape {
                token,
                input: std::mem::replace(&mut current, output.clone()),
                output,
                parameters,
            });
        }
        if self.classes < 2 {
            return Err(fail(
                self.hidden.len() + 2,
                self.classes.to_string(),
                "classifier needs at least 2 classes".into(),
            ));
        }
        let fan_in: usize = current.iter().product();
        out.push(LayerShape {
            token: match self.classifier_form {
                ClassifierForm::Softmax => format!("S{}", self.classes),
                ClassifierForm::Bare => self.classes.to_string(),
            },
            input: current,
            output: vec![self.classes],
            parameters: (fan_in + 1) * self.classes,
        });
        Ok(out)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.shapes()?.iter().map(|s| s.parameters).sum())
    }

    fn render_input(&self) -> String {
        self.render().split('-').next().unwrap_or_default().to_string()
    }
}

/// Parses an architecture string. `frame_count` is the number of input frames
/// of an image network (`T_a`); it is ignored for vector inputs.
pub fn parse_arch(text: &str, frame_count: usize) -> Result<ModelSpec> {
    let tokens: Vec<&str> = text.trim().split('-').collect();
    let fail = |position: usize, reason: &str| Error::Arch {
        position,
        token: tokens.get(position - 1).unwrap_or(&"").to_string(),
        reason: reason.to_string(),
    };

    let input = match tokens[0] {
        t if t.starts_with('D') => InputSpec::Vector {
            dim: number(&t[1..]).ok_or_else(|| fail(1, "expected D{n}"))?,
        },
        t if t.starts_with('I') => {
            if frame_count == 0 {
                return Err(fail(1, "image input needs a frame count >= 1"));
            }
            InputSpec::Image {
                size: number(&t[1..]).ok_or_else(|| fail(1, "expected I{size}"))?,
                frames: frame_count,
            }
        }
        _ => return Err(fail(1, "first token must be D{n} or I{size}")),
    };
    if tokens.len() < 2 {
        return Err(fail(1, "missing terminal classifier"));
    }

    let last = tokens.len();
    let (classes, classifier_form) = match tokens[last - 1] {
        t if t.starts_with('S') => (
            number(&t[1..]).ok_or_else(|| fail(last, "expected S{classes}"))?,
            ClassifierForm::Softmax,
        ),
        t if number(t).is_some() => (number(t).unwrap_or(0), ClassifierForm::Bare),
        _ => return Err(fail(last, "missing terminal classifier (S{c} or a bare class count)")),
    };

    let mut hidden = Vec::with_capacity(last - 2);
    for (i, token) in tokens[1..last - 1].iter().enumerate() {
        let position = i + 2;
        let layer = if let Some(rest) = token.strip_prefix("FC") {
            LayerSpec::Dense {
                units: number(rest).ok_or_else(|| fail(position, "expected FC{units}"))?,
            }
        } else if let Some(rest) = token.strip_prefix('C') {
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| fail(position, "expected C(kernel,filters)"))?;
            let (k, m) = inner
                .split_once(',')
                .ok_or_else(|| fail(position, "expected C(kernel,filters)"))?;
            LayerSpec::Conv {
                kernel: number(k.trim()).ok_or_else(|| fail(position, "bad kernel size"))?,
                filters: number(m.trim()).ok_or_else(|| fail(position, "bad filter count"))?,
            }
        } else if let Some(rest) = token.strip_prefix('L') {
            LayerSpec::Lcn {
                window: number(rest).ok_or_else(|| fail(position, "expected L{window}"))?,
            }
        } else if let Some(rest) = token.strip_prefix('P') {
            LayerSpec::Pool {
                window: number(rest).ok_or_else(|| fail(position, "expected P{window}"))?,
            }
        } else if token.starts_with('S') || number(token).is_some() {
            return Err(fail(position, "classifier must be the last token"));
        } else {
            return Err(fail(position, "unknown token"));
        };
        hidden.push(layer);
    }

    let spec = ModelSpec {
        input,
        hidden,
        classes,
        classifier_form,
    };
    spec.shapes()?;
    Ok(spec)
}

fn number(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

//! Layer and architecture descriptions.

use crate::error::{Error, Result};

/// One layer of a feed-forward network.
///
/// Kernel-bearing layers (`FullyConnected`, `Conv2d`) own one kernel matrix
/// and one bias vector in the matching [`super::ParamSet`] slot. Convolution
/// kernels are stored already unfolded as `[kh·kw·in_ch, out_ch]` matrices so
/// that saliency, masks, and pruning index every kernel the same way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    FullyConnected { inp: usize, out: usize },
    Conv2d { kh: usize, kw: usize, in_ch: usize, out_ch: usize, stride: usize, pad: usize },
    ReLU,
    /// Fixed 2x2 max pooling with stride 2; requires even spatial dims.
    MaxPool2,
    Flatten,
}

impl LayerSpec {
    pub fn is_kernel(&self) -> bool {
        matches!(self, LayerSpec::FullyConnected { .. } | LayerSpec::Conv2d { .. })
    }

    /// `[rows, cols]` of the kernel matrix, when the layer has one.
    pub fn kernel_shape(&self) -> Option<[usize; 2]> {
        match *self {
            LayerSpec::FullyConnected { inp, out } => Some([inp, out]),
            LayerSpec::Conv2d { kh, kw, in_ch, out_ch, .. } => Some([kh * kw * in_ch, out_ch]),
            _ => None,
        }
    }
}

/// Activation shape while walking a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Image { c: usize, h: usize, w: usize },
    Vector(usize),
}

impl ActShape {
    pub fn elements(&self) -> usize {
        match *self {
            ActShape::Image { c, h, w } => c * h * w,
            ActShape::Vector(d) => d,
        }
    }
}

fn pool_out(side: usize) -> Result<usize> {
    if side == 0 || !side.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "maxpool2 needs even spatial dims, got {side}"
        )));
    }
    Ok(side / 2)
}

fn conv_len(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < k || !(padded - k).is_multiple_of(stride) {
        return Err(Error::Dimension(format!(
            "conv window {k}/stride {stride}/pad {pad} does not tile input {input}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Architecture: ordered layers plus the input image shape and class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    /// `[channels, height, width]` of one input example.
    pub input_shape: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Shape produced by feeding `shape` through `layer`.
    pub fn layer_out(layer: &LayerSpec, shape: ActShape) -> Result<ActShape> {
        match (*layer).clone() {
            LayerSpec::FullyConnected { inp, out } => match shape {
                ActShape::Vector(d) if d == inp => Ok(ActShape::Vector(out)),
                other => Err(Error::Dimension(format!(
                    "fc({inp},{out}) cannot consume {other:?}"
                ))),
            },
            LayerSpec::Conv2d { kh, kw, in_ch, out_ch, stride, pad } => match shape {
                ActShape::Image { c, h, w } if c == in_ch => Ok(ActShape::Image {
                    c: out_ch,
                    h: conv_len(h, kh, stride, pad)?,
                    w: conv_len(w, kw, stride, pad)?,
                }),
                other => Err(Error::Dimension(format!(
                    "conv with {in_ch} input channels cannot consume {other:?}"
                ))),
            },
            LayerSpec::ReLU => Ok(shape),
            LayerSpec::MaxPool2 => match shape {
                ActShape::Image { c, h, w } => Ok(ActShape::Image {
                    c,
                    h: pool_out(h)?,
                    w: pool_out(w)?,
                }),
                other => Err(Error::Dimension(format!("maxpool2 cannot consume {other:?}"))),
            },
            LayerSpec::Flatten => Ok(ActShape::Vector(shape.elements())),
        }
    }

    /// Activation shapes after every layer; errors if consecutive layers
    /// do not compose or the final shape is not `[classes]`.
    pub fn shape_walk(&self) -> Result<Vec<ActShape>> {
        let [c, h, w] = self.input_shape;
        let mut shape = ActShape::Image { c, h, w };
        let mut walk = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = Self::layer_out(layer, shape)?;
            walk.push(shape);
        }
        if shape != ActShape::Vector(self.classes) {
            return Err(Error::Dimension(format!(
                "final layer produces {shape:?}, model declares {} classes",
                self.classes
            )));
        }
        Ok(walk)
    }

    pub fn validate(&self) -> Result<()> {
        self.shape_walk().map(|_| ())
    }

    /// Indices of kernel-bearing layers, in order.
    pub fn kernel_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_kernel())
            .map(|(i, _)| i)
            .collect()
    }

    /// Total kernel entry count; biases are counted separately.
    pub fn total_kernel_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.kernel_shape())
            .map(|[r, c]| r * c)
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    pub fn total_bias_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.kernel_shape())
            .map(|[_, c]| c)
            .sum()
    }

    /// Three fully-connected layers, 784-300-100-10 (266,200 kernel weights).
    pub fn lenet_300_100() -> Self {
        ModelSpec {
            input_shape: [1, 28, 28],
            classes: 10,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::FullyConnected { inp: 784, out: 300 },
                LayerSpec::ReLU,
                LayerSpec::FullyConnected { inp: 300, out: 100 },
                LayerSpec::ReLU,
                LayerSpec::FullyConnected { inp: 100, out: 10 },
            ],
        }
    }

    /// Two conv layers plus two fully-connected layers (430,500 kernel weights).
    pub fn lenet_5() -> Self {
        ModelSpec {
            input_shape: [1, 28, 28],
            classes: 10,
            layers: vec![
                LayerSpec::Conv2d { kh: 5, kw: 5, in_ch: 1, out_ch: 20, stride: 1, pad: 0 },
                LayerSpec::ReLU,
                LayerSpec::MaxPool2,
                LayerSpec::Conv2d { kh: 5, kw: 5, in_ch: 20, out_ch: 50, stride: 1, pad: 0 },
                LayerSpec::ReLU,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::FullyConnected { inp: 800, out: 500 },
                LayerSpec::ReLU,
                LayerSpec::FullyConnected { inp: 500, out: 10 },
            ],
        }
    }

    /// Flatten + ReLU-separated fully-connected stack. The last width is the
    /// class count.
    pub fn mlp(input_shape: [usize; 3], widths: &[usize]) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Argument("mlp needs at least one layer width".into()));
        }
        let mut layers = vec![LayerSpec::Flatten];
        let mut inp = input_shape.iter().product::<usize>();
        for (i, &out) in widths.iter().enumerate() {
            if i > 0 {
                layers.push(LayerSpec::ReLU);
            }
            layers.push(LayerSpec::FullyConnected { inp, out });
            inp = out;
        }
        let spec = ModelSpec {
            input_shape,
            classes: *widths.last().unwrap(),
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical textual form, used in checkpoint headers and config files.
    pub fn spec_string(&self) -> String {
        let layers: Vec<String> = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::FullyConnected { inp, out } => format!("fc({inp},{out})"),
                LayerSpec::Conv2d { kh, kw, in_ch, out_ch, stride, pad } => {
                    format!("conv({kh},{kw},{in_ch},{out_ch},{stride},{pad})")
                }
                LayerSpec::ReLU => "relu".into(),
                LayerSpec::MaxPool2 => "maxpool2".into(),
                LayerSpec::Flatten => "flatten".into(),
            })
            .collect();
        format!(
            "input={}x{}x{};classes={};layers={}",
            self.input_shape[0],
            self.input_shape[1],
            self.input_shape[2],
            self.classes,
            layers.join(",")
        )
    }

    /// Parse a preset name (`lenet-300-100`, `lenet-5`), an `mlp(...)`
    /// constructor, or the canonical form emitted by [`Self::spec_string`].
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "lenet-300-100" => return Ok(Self::lenet_300_100()),
            "lenet-5" => return Ok(Self::lenet_5()),
            _ => {}
        }
        if let Some(args) = text.strip_prefix("mlp(").and_then(|s| s.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            if parts.len() < 2 {
                return Err(Error::Format(format!("mlp spec needs input and widths: {text}")));
            }
            let input_shape = parse_input_shape(parts[0])?;
            let widths = parts[1..]
                .iter()
                .map(|p| parse_count(p))
                .collect::<Result<Vec<_>>>()?;
            return Self::mlp(input_shape, &widths);
        }
        let mut input_shape = None;
        let mut classes = None;
        let mut layers = None;
        for field in text.split(';') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad model field: {field}")))?;
            match key.trim() {
                "input" => input_shape = Some(parse_input_shape(value)?),
                "classes" => classes = Some(parse_count(value)?),
                "layers" => layers = Some(parse_layer_list(value)?),
                other => return Err(Error::Format(format!("unknown model field: {other}"))),
            }
        }
        let spec = ModelSpec {
            input_shape: input_shape
                .ok_or_else(|| Error::Format("model spec missing input".into()))?,
            classes: classes.ok_or_else(|| Error::Format("model spec missing classes".into()))?,
            layers: layers.ok_or_else(|| Error::Format("model spec missing layers".into()))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("expected a count, got {s:?}")))
}

fn parse_input_shape(s: &str) -> Result<[usize; 3]> {
    let dims: Vec<usize> = s
        .trim()
        .split('x')
        .map(parse_count)
        .collect::<Result<Vec<_>>>()?;
    match dims.as_slice() {
        &[d] => Ok([1, 1, d]),
        &[c, h, w] => Ok([c, h, w]),
        other => Err(Error::Format(format!("input shape needs 1 or 3 dims, got {other:?}"))),
    }
}

fn parse_layer_list(s: &str) -> Result<Vec<LayerSpec>> {
    s.trim()
        .split(',')
        .scan(String::new(), |buf, piece| {
            // conv(...) and fc(...) contain commas; re-join until parens balance.
            buf.push_str(piece);
            if buf.matches('(').count() == buf.matches(')').count() {
                let done = std::mem::take(buf);
                Some(Some(done))
            } else {
                buf.push(',');
                Some(None)
            }
        })
        .flatten()
        .map(|item| parse_layer(&item))
        .collect()
}

fn parse_layer(s: &str) -> Result<LayerSpec> {
    let s = s.trim();
    match s {
        "relu" => return Ok(LayerSpec::ReLU),
        "maxpool2" => return Ok(LayerSpec::MaxPool2),
        "flatten" => return Ok(LayerSpec::Flatten),
        _ => {}
    }
    if let Some(args) = s.strip_prefix("fc(").and_then(|x| x.strip_suffix(')')) {
        let v: Vec<usize> = args.split(',').map(parse_count).collect::<Result<_>>()?;
        if let [inp, out] = v.as_slice() {
            return Ok(LayerSpec::FullyConnected { inp: *inp, out: *out });
        }
    }
    if let Some(args) = s.strip_prefix("conv(").and_then(|x| x.strip_suffix(')')) {
        let v: Vec<usize> = args.split(',').map(parse_count).collect::<Result<_>>()?;
        if let [kh, kw, in_ch, out_ch, stride, pad] = v.as_slice() {
            return Ok(LayerSpec::Conv2d {
                kh: *kh,
                kw: *kw,
                in_ch: *in_ch,
                out_ch: *out_ch,
                stride: *stride,
                pad: *pad,
            });
        }
    }
    Err(Error::Format(format!("unknown layer: {s}")))
}

//! Declarative detector compositions and their block-level realization.
//!
//! `In_{d,α,β,γ,δ,ε}` lists the channel counts at the boundaries of the
//! entry flow: `d` input channels, `α` and `β` after the two plain 3×3
//! convolutions, `γ`, `δ`, `ε` after the three residual separable stages.
//! A layer exists only when both of its boundary counts are nonzero, so
//! leading zeros make the first nonzero count the width of an externally
//! supplied feature map and trailing zeros truncate the flow.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{contract, ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    C,
    S,
    CS,
    CST,
    #[serde(rename = "CS_noT", alias = "CSnoT")]
    CsNoT,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::C, Variant::S, Variant::CS, Variant::CST, Variant::CsNoT];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::C => "C",
            Variant::S => "S",
            Variant::CS => "CS",
            Variant::CST => "CST",
            Variant::CsNoT => "CS_noT",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("csnot") && *v == Variant::CsNoT))
            .ok_or_else(|| ModelError::Contract(format!("unknown variant {s:?}")))
    }
}

/// Detector input planes, each `3 × size × size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Color,
    SpatialNoise,
    TemporalNoise,
    /// Constant zero image (temporal ablation).
    Zero,
}

/// `In_{d,α,β,γ,δ,ε}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryFlowSpec(pub [usize; 6]);

impl EntryFlowSpec {
    pub fn validate(&self) -> Result<()> {
        let w = &self.0;
        let nz: Vec<usize> = (0..6).filter(|&i| w[i] > 0).collect();
        if nz.len() < 2 {
            return contract(format!("entry flow {self} needs an input width and at least one layer"));
        }
        if nz.last().unwrap() - nz[0] + 1 != nz.len() {
            return contract(format!("entry flow {self}: zeros may only lead or trail"));
        }
        Ok(())
    }

    /// Width of the consumed feature map.
    pub fn input_width(&self) -> usize {
        self.0.iter().copied().find(|&v| v > 0).unwrap_or(0)
    }

    pub fn output_width(&self) -> usize {
        self.0.iter().rev().copied().find(|&v| v > 0).unwrap_or(0)
    }

    /// Layer `k` (1..=5) maps boundary `k-1` to boundary `k`.
    pub fn layer_enabled(&self, k: usize) -> bool {
        self.0[k - 1] > 0 && self.0[k] > 0
    }
}

impl fmt::Display for EntryFlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.0;
        write!(f, "In_{{{},{},{},{},{},{}}}", w[0], w[1], w[2], w[3], w[4], w[5])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamSpec {
    Input { kind: InputKind },
    Entry { name: String, widths: EntryFlowSpec, input: Box<StreamSpec> },
    Concat { name: String, streams: Vec<StreamSpec> },
}

impl StreamSpec {
    fn input(kind: InputKind) -> Self {
        StreamSpec::Input { kind }
    }

    fn entry(name: &str, widths: [usize; 6], input: StreamSpec) -> Self {
        StreamSpec::Entry {
            name: name.into(),
            widths: EntryFlowSpec(widths),
            input: Box::new(input),
        }
    }

    fn concat(name: &str, streams: Vec<StreamSpec>) -> Self {
        StreamSpec::Concat {
            name: name.into(),
            streams,
        }
    }

    pub fn inputs(&self) -> BTreeSet<InputKind> {
        match self {
            StreamSpec::Input { kind } => BTreeSet::from([*kind]),
            StreamSpec::Entry { input, .. } => input.inputs(),
            StreamSpec::Concat { streams, .. } => streams.iter().flat_map(|s| s.inputs()).collect(),
        }
    }
}

/// Full detector description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub variant: Variant,
    pub trunk: StreamSpec,
    pub middle_repeats: usize,
    /// 1.0 reproduces the published feature counts.
    pub width_scale: f64,
    pub input_size: usize,
}

impl DetectorSpec {
    /// Published composition at full width and 299×299 input.
    pub fn standard(variant: Variant) -> Self {
        use InputKind::*;
        let (trunk, middle_repeats) = match variant {
            Variant::C => (StreamSpec::entry("color", [3, 32, 64, 128, 256, 728], StreamSpec::input(Color)), 8),
            Variant::S => (StreamSpec::entry("spatial", [3, 32, 64, 128, 256, 728], StreamSpec::input(SpatialNoise)), 0),
            Variant::CS => (
                StreamSpec::concat(
                    "fusion",
                    vec![
                        StreamSpec::entry("color", [3, 32, 64, 128, 256, 364], StreamSpec::input(Color)),
                        StreamSpec::entry("spatial", [3, 32, 64, 128, 256, 364], StreamSpec::input(SpatialNoise)),
                    ],
                ),
                2,
            ),
            Variant::CST | Variant::CsNoT => {
                let temporal_input = if variant == Variant::CST { TemporalNoise } else { Zero };
                (
                    StreamSpec::concat(
                        "fusion",
                        vec![
                            StreamSpec::entry(
                                "color_temporal",
                                [0, 0, 72, 128, 256, 512],
                                StreamSpec::concat(
                                    "inner_fusion",
                                    vec![
                                        StreamSpec::entry("color", [3, 32, 64, 0, 0, 0], StreamSpec::input(Color)),
                                        StreamSpec::entry("temporal", [3, 8, 8, 0, 0, 0], StreamSpec::input(temporal_input)),
                                    ],
                                ),
                            ),
                            StreamSpec::entry("spatial", [3, 16, 32, 64, 128, 256], StreamSpec::input(SpatialNoise)),
                        ],
                    ),
                    1,
                )
            }
        };
        DetectorSpec {
            variant,
            trunk,
            middle_repeats,
            width_scale: 1.0,
            input_size: 299,
        }
    }

    pub fn with_width_scale(mut self, s: f64) -> Self {
        self.width_scale = s;
        self
    }

    pub fn with_input_size(mut self, n: usize) -> Self {
        self.input_size = n;
        self
    }

    pub fn inputs(&self) -> BTreeSet<InputKind> {
        self.trunk.inputs()
    }

    /// Width after scaling (rounded up, never below 1).
    pub fn scaled(&self, width: usize) -> usize {
        if width == 0 {
            0
        } else {
            ((width as f64 * self.width_scale) - 1e-9).ceil().max(1.0) as usize
        }
    }

    /// Parse the TOML spec-file form. Only `variant` is required; the other
    /// keys default to the published configuration.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            variant: Variant,
            width_scale: Option<f64>,
            input_size: Option<usize>,
            middle_repeats: Option<usize>,
            trunk: Option<StreamSpec>,
        }
        let f: File = toml::from_str(s).map_err(|e| ModelError::Format {
            what: "detector spec",
            detail: e.to_string(),
        })?;
        let mut spec = DetectorSpec::standard(f.variant);
        if let Some(v) = f.width_scale {
            spec.width_scale = v;
        }
        if let Some(v) = f.input_size {
            spec.input_size = v;
        }
        if let Some(v) = f.middle_repeats {
            spec.middle_repeats = v;
        }
        if let Some(t) = f.trunk {
            spec.trunk = t;
        }
        Plan::compile(&spec)?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("detector spec serializes")
    }

    pub fn shape_trace(&self) -> Result<ShapeTrace> {
        Ok(Plan::compile(self)?.trace(self.input_size))
    }

    /// Side length of the receptive field of the named trace layer along
    /// its widest path.
    pub fn receptive_field(&self, layer: &str) -> Result<usize> {
        let trace = self.shape_trace()?;
        trace
            .layers
            .iter()
            .find(|l| l.name == layer)
            .map(|l| l.receptive_field)
            .ok_or_else(|| ModelError::Contract(format!("no layer named {layer:?}")))
    }
}

/// Receptive field side of a chain of `(kernel, stride)` layers.
pub fn receptive_field_of(layers: &[(usize, usize)]) -> usize {
    let (rf, _) = layers.iter().fold((1usize, 1usize), |(rf, jump), &(k, s)| (rf + (k - 1) * jump, jump * s));
    rf
}

// ---- realized plan ------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ConvUnit {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
}

/// Two separable convs (`cin -> mid -> cout`), 3×3 max-pool stride 2 and a
/// strided 1×1 projection on the residual path.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct StageUnit {
    pub name: String,
    pub cin: usize,
    pub mid: usize,
    pub cout: usize,
    pub start_relu: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum PlanNode {
    Input(InputKind),
    Entry {
        name: String,
        convs: Vec<ConvUnit>,
        stages: Vec<StageUnit>,
        disabled: Vec<String>,
        input: Box<PlanNode>,
        out_width: usize,
    },
    Concat {
        name: String,
        inputs: Vec<PlanNode>,
        out_width: usize,
    },
}

impl PlanNode {
    pub fn width(&self) -> usize {
        match self {
            PlanNode::Input(_) => 3,
            PlanNode::Entry { out_width, .. } | PlanNode::Concat { out_width, .. } => *out_width,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ExitUnit {
    pub stage: StageUnit,
    pub sep: [(String, usize, usize); 2],
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Plan {
    pub trunk: PlanNode,
    pub middle: Vec<(String, usize)>,
    pub exit: ExitUnit,
}

impl Plan {
    pub fn compile(spec: &DetectorSpec) -> Result<Plan> {
        if !spec.width_scale.is_finite() || spec.width_scale <= 0.0 {
            return contract(format!("width_scale must be positive, got {}", spec.width_scale));
        }
        let trunk = compile_node(spec, &spec.trunk)?;
        let width = trunk.width();
        let middle = (0..spec.middle_repeats).map(|i| (format!("middle.{i}"), width)).collect();
        let prop = |w: usize| ((w * width) as f64 / 728.0).ceil() as usize;
        let r1 = prop(1024);
        let r2 = prop(1536);
        let r3 = prop(2048);
        let exit = ExitUnit {
            stage: StageUnit {
                name: "exit.stage".into(),
                cin: width,
                mid: width,
                cout: r1,
                start_relu: true,
            },
            sep: [("exit.sep1".into(), r1, r2), ("exit.sep2".into(), r2, r3)],
            classes: 2,
        };
        let plan = Plan { trunk, middle, exit };
        plan.check_spatial(spec.input_size)?;
        Ok(plan)
    }

    fn check_spatial(&self, size: usize) -> Result<()> {
        let trace = self.trace(size);
        if let Some(bad) = trace.layers.iter().find(|l| l.out_shape.iter().any(|&d| d == 0)) {
            return contract(format!("input size {size} too small: layer {} collapses", bad.name));
        }
        if let Some(msg) = trace.fusion_error {
            return contract(msg);
        }
        Ok(())
    }

    pub fn trace(&self, size: usize) -> ShapeTrace {
        let mut t = ShapeTrace::default();
        let (shape, rf) = trace_node(&self.trunk, size, &mut t);
        let mut shape = shape;
        let mut rf = rf;
        let mut prev = node_out_name(&self.trunk);
        for (name, w) in &self.middle {
            let params = 3 * sep_params(*w, *w) + 3 * 2 * w;
            rf = rf.extend(3, 1).extend(3, 1).extend(3, 1);
            t.push(name, "middle", vec![prev.clone()], shape, shape, params, rf, false);
            prev = name.clone();
        }
        let (s, r) = trace_stage(&self.exit.stage, shape, rf, &prev, &mut t);
        shape = s;
        rf = r;
        prev = self.exit.stage.name.clone();
        for (name, cin, cout) in &self.exit.sep {
            let out = [*cout, shape[1], shape[2]];
            rf = rf.extend(3, 1);
            t.push(name, "separable_conv", vec![prev.clone()], shape, out, sep_params(*cin, *cout) + 2 * cout, rf, false);
            shape = out;
            prev = name.clone();
        }
        let pooled = [shape[0], 1, 1];
        t.push("exit.pool", "global_avg_pool", vec![prev], shape, pooled, 0, rf, false);
        let classes = self.exit.classes;
        t.push(
            "exit.fc",
            "fully_connected",
            vec!["exit.pool".into()],
            pooled,
            [classes, 1, 1],
            shape[0] * classes + classes,
            rf,
            false,
        );
        t
    }
}

fn compile_node(spec: &DetectorSpec, node: &StreamSpec) -> Result<PlanNode> {
    match node {
        StreamSpec::Input { kind } => Ok(PlanNode::Input(*kind)),
        StreamSpec::Concat { name, streams } => {
            if streams.is_empty() {
                return contract(format!("fusion {name} has no streams"));
            }
            let inputs = streams.iter().map(|s| compile_node(spec, s)).collect::<Result<Vec<_>>>()?;
            let out_width = inputs.iter().map(PlanNode::width).sum();
            Ok(PlanNode::Concat {
                name: name.clone(),
                inputs,
                out_width,
            })
        }
        StreamSpec::Entry { name, widths, input } => {
            widths.validate()?;
            let input = compile_node(spec, input)?;
            let actual = input.width();
            let declared = widths.input_width();
            let external = widths.0[0] == 0;
            if !external && matches!(input, PlanNode::Input(_)) && declared != 3 {
                return contract(format!("{name}: {widths} reads a 3-channel image but declares d = {declared}"));
            }
            if (spec.width_scale - 1.0).abs() < 1e-12 && actual != declared {
                return contract(format!(
                    "{name}: {widths} expects {declared} input channels, stream {} provides {actual}",
                    input_label(&input)
                ));
            }
            // Boundary widths after scaling; the input boundary is whatever arrives.
            let first = (0..6).find(|&i| widths.0[i] > 0).unwrap();
            let mut bounds = [0usize; 6];
            for i in 0..6 {
                bounds[i] = if i == first { actual } else { spec.scaled(widths.0[i]) };
            }
            let mut convs = Vec::new();
            let mut stages = Vec::new();
            let mut disabled = Vec::new();
            for k in 1..=5 {
                let layer = match k {
                    1 => "conv1".to_string(),
                    2 => "conv2".to_string(),
                    s => format!("stage{}", s - 2),
                };
                let full = format!("{name}.{layer}");
                if !widths.layer_enabled(k) {
                    disabled.push(full);
                    continue;
                }
                let (cin, cout) = (bounds[k - 1], bounds[k]);
                if k <= 2 {
                    convs.push(ConvUnit {
                        name: full,
                        cin,
                        cout,
                        stride: if k == 1 { 2 } else { 1 },
                    });
                } else {
                    let start_relu = !stages.is_empty();
                    stages.push(StageUnit {
                        name: full,
                        cin,
                        mid: cout,
                        cout,
                        start_relu,
                    });
                }
            }
            let out_width = bounds[(0..6).rev().find(|&i| widths.0[i] > 0).unwrap()];
            Ok(PlanNode::Entry {
                name: name.clone(),
                convs,
                stages,
                disabled,
                input: Box::new(input),
                out_width,
            })
        }
    }
}

fn input_label(node: &PlanNode) -> String {
    match node {
        PlanNode::Input(k) => format!("{k:?}").to_lowercase(),
        PlanNode::Entry { name, .. } | PlanNode::Concat { name, .. } => name.clone(),
    }
}

fn node_out_name(node: &PlanNode) -> String {
    match node {
        PlanNode::Input(k) => format!("input.{}", format!("{k:?}").to_lowercase()),
        PlanNode::Entry { name, .. } | PlanNode::Concat { name, .. } => name.clone(),
    }
}

fn sep_params(cin: usize, cout: usize) -> usize {
    cin * 9 + cout * cin
}

pub(crate) fn stage_params(s: &StageUnit) -> usize {
    sep_params(s.cin, s.mid) + 2 * s.mid + sep_params(s.mid, s.cout) + 2 * s.cout + s.cin * s.cout + 2 * s.cout
}

/// Receptive field bookkeeping: side length and cumulative stride.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Rf {
    size: usize,
    jump: usize,
}

impl Rf {
    const UNIT: Rf = Rf { size: 1, jump: 1 };

    fn extend(self, k: usize, stride: usize) -> Rf {
        Rf {
            size: self.size + (k - 1) * self.jump,
            jump: self.jump * stride,
        }
    }
}

fn conv_out(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    if n + 2 * pad < k {
        0
    } else {
        (n + 2 * pad - k) / stride + 1
    }
}

fn trace_stage(s: &StageUnit, shape: [usize; 3], rf: Rf, prev: &str, t: &mut ShapeTrace) -> ([usize; 3], Rf) {
    let h = conv_out(shape[1], 3, 2, 1);
    let w = conv_out(shape[2], 3, 2, 1);
    let out = [s.cout, h, w];
    let rf = rf.extend(3, 1).extend(3, 1).extend(3, 2);
    t.push(&s.name, "residual_stage", vec![prev.to_string()], shape, out, stage_params(s), rf, false);
    (out, rf)
}

fn trace_node(node: &PlanNode, size: usize, t: &mut ShapeTrace) -> ([usize; 3], Rf) {
    match node {
        PlanNode::Input(kind) => {
            let shape = [3, size, size];
            let name = node_out_name(node);
            // the temporal branch carries the scalar threshold
            let params = usize::from(matches!(kind, InputKind::TemporalNoise | InputKind::Zero));
            t.push(&name, &format!("input:{kind:?}").to_lowercase(), vec![], shape, shape, params, Rf::UNIT, false);
            (shape, Rf::UNIT)
        }
        PlanNode::Entry {
            name,
            convs,
            stages,
            disabled,
            input,
            ..
        } => {
            let (mut shape, mut rf) = trace_node(input, size, t);
            let mut prev = node_out_name(input);
            let layer_names: Vec<String> = ["conv1", "conv2", "stage1", "stage2", "stage3"].iter().map(|l| format!("{name}.{l}")).collect();
            let mut convs = convs.iter();
            let mut stages = stages.iter();
            for lname in &layer_names {
                if disabled.contains(lname) {
                    // disabled layers keep the shape and carry no parameters
                    t.push(lname, "disabled", vec![prev.clone()], shape, shape, 0, rf, true);
                    prev = lname.clone();
                    continue;
                }
                if lname.contains(".conv") {
                    let c = convs.next().unwrap();
                    let out = [c.cout, conv_out(shape[1], 3, c.stride, 0), conv_out(shape[2], 3, c.stride, 0)];
                    rf = rf.extend(3, c.stride);
                    t.push(&c.name, "conv_bn_relu", vec![prev.clone()], shape, out, c.cin * c.cout * 9 + 2 * c.cout, rf, false);
                    shape = out;
                    prev = c.name.clone();
                } else {
                    let s = stages.next().unwrap();
                    let (o, r) = trace_stage(s, shape, rf, &prev, t);
                    shape = o;
                    rf = r;
                    prev = s.name.clone();
                }
            }
            t.push(name, "entry_flow", vec![prev], shape, shape, 0, rf, false);
            (shape, rf)
        }
        PlanNode::Concat { name, inputs, out_width } => {
            let parts: Vec<([usize; 3], Rf, String)> = inputs
                .iter()
                .map(|n| {
                    let (s, r) = trace_node(n, size, t);
                    (s, r, node_out_name(n))
                })
                .collect();
            let (h, w) = (parts[0].0[1], parts[0].0[2]);
            for (s, _, label) in &parts[1..] {
                if (s[1], s[2]) != (h, w) && t.fusion_error.is_none() {
                    t.fusion_error = Some(format!(
                        "fusion {name}: stream {} is {}x{} but stream {label} is {}x{}",
                        parts[0].2, h, w, s[1], s[2]
                    ));
                }
            }
            let rf = parts.iter().map(|p| p.1).max_by_key(|r| r.size).unwrap();
            let in_shape = parts[0].0;
            let out = [*out_width, h, w];
            t.push(name, "concat_channels", parts.iter().map(|p| p.2.clone()).collect(), in_shape, out, 0, rf, false);
            t.concat_inputs.push((name.clone(), parts.iter().map(|p| (p.2.clone(), p.0)).collect()));
            (out, rf)
        }
    }
}

/// One row of a shape trace; shapes are `[C, H, W]` per sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerTrace {
    pub name: String,
    pub kind: String,
    pub inputs: Vec<String>,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub params: usize,
    pub receptive_field: usize,
    pub disabled: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ShapeTrace {
    pub layers: Vec<LayerTrace>,
    /// Per fusion: the incoming streams and their shapes.
    pub concat_inputs: Vec<(String, Vec<(String, [usize; 3])>)>,
    #[serde(skip)]
    pub fusion_error: Option<String>,
}

impl ShapeTrace {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, name: &str, kind: &str, inputs: Vec<String>, in_shape: [usize; 3], out_shape: [usize; 3], params: usize, rf: Rf, disabled: bool) {
        self.layers.push(LayerTrace {
            name: name.to_string(),
            kind: kind.to_string(),
            inputs,
            in_shape,
            out_shape,
            params,
            receptive_field: rf.size,
            disabled,
        });
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.params).sum()
    }

    pub fn layer(&self, name: &str) -> Option<&LayerTrace> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Channel count entering the first middle block (or the exit flow).
    pub fn trunk_width(&self) -> usize {
        self.layers
            .iter()
            .find(|l| l.name.starts_with("middle.") || l.name == "exit.stage")
            .map(|l| l.in_shape[0])
            .unwrap_or(0)
    }

    /// Plain-text table: name, kind, output shape, parameters.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.layers {
            s.push_str(&format!(
                "{:<28} {:<18} {:>5}x{:<4}x{:<4} params {:>10}  rf {}\n",
                l.name, l.kind, l.out_shape[0], l.out_shape[1], l.out_shape[2], l.params, l.receptive_field
            ));
        }
        s.push_str(&format!("total parameters {}\n", self.total_params()));
        s
    }
}

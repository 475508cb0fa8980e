use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use vfd_tensor::{BatchNormState, Float, Tape, Tensor, Var};

use crate::architecture::{ConvUnit, ExitUnit, InputKind, Plan, PlanNode, StageUnit};
use crate::signal::{threshold_and_filter, RangeNorm, RangeNormState, TemporalNoiseConfig, MIN_THRESHOLD, STACK_LEN};
use crate::{contract, DetectorSpec, ParamStore, Result};

pub(crate) const THRESHOLD_PARAM: &str = "temporal.threshold";

/// Temporal stream input for a batch.
#[derive(Clone, Debug)]
pub enum TemporalInput<T> {
    /// Six consecutive high-passed frames `A_{i-3..=i+2}`, each `[N,3,S,S]`;
    /// steps 3–6 run inside the forward pass with the trainable threshold.
    Highpassed(Vec<Tensor<T>>),
    /// A precomputed (or constant) plane `[N,3,S,S]`.
    Plane(Tensor<T>),
}

/// One batch of detector inputs; only the planes the variant reads are
/// required.
#[derive(Clone, Debug, Default)]
pub struct DetectorInputs<T> {
    pub color: Option<Tensor<T>>,
    pub spatial: Option<Tensor<T>>,
    pub temporal: Option<TemporalInput<T>>,
}

/// Result of a forward pass: class scores `[N,2]` and the tape variable of
/// every parameter, indexed like the detector's [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Forward {
    pub scores: Var,
    pub params: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Detector<T: Float> {
    pub(crate) spec: DetectorSpec,
    pub(crate) plan: Plan,
    pub(crate) params: ParamStore<T>,
    pub(crate) bn: HashMap<String, BatchNormState<T>>,
    pub(crate) temporal_norm: RangeNormState,
    pub(crate) temporal_cfg: TemporalNoiseConfig,
}

struct Ctx<'a, T: Float> {
    tape: &'a mut Tape<T>,
    params: &'a ParamStore<T>,
    vars: &'a [Var],
    bn: &'a mut HashMap<String, BatchNormState<T>>,
    temporal_norm: &'a mut RangeNormState,
    temporal_cfg: &'a TemporalNoiseConfig,
    inputs: &'a DetectorInputs<T>,
    batch: usize,
    size: usize,
    training: bool,
}

impl<T: Float> Ctx<'_, T> {
    fn p(&self, name: &str) -> Var {
        self.vars[self.params.id(name).unwrap_or_else(|| panic!("parameter {name} not registered"))]
    }

    fn conv_bn_relu(&mut self, x: Var, c: &ConvUnit) -> Result<Var> {
        let y = self.tape.conv2d(x, self.p(&format!("{}.weight", c.name)), c.stride, 0)?;
        let y = self.bn(y, &format!("{}.bn", c.name))?;
        Ok(self.tape.relu(y))
    }

    fn bn(&mut self, x: Var, name: &str) -> Result<Var> {
        let (g, b) = (self.p(&format!("{name}.gamma")), self.p(&format!("{name}.beta")));
        let state = self.bn.get_mut(name).expect("batch-norm state registered");
        Ok(self.tape.batch_norm(x, g, b, state, self.training)?)
    }

    fn sep(&mut self, x: Var, name: &str) -> Result<Var> {
        let dw = self.p(&format!("{name}.depthwise"));
        let pw = self.p(&format!("{name}.pointwise"));
        Ok(self.tape.separable_conv2d(x, dw, pw)?)
    }

    fn stage(&mut self, x: Var, s: &StageUnit) -> Result<Var> {
        let mut h = if s.start_relu { self.tape.relu(x) } else { x };
        h = self.sep(h, &format!("{}.sep1", s.name))?;
        h = self.bn(h, &format!("{}.bn1", s.name))?;
        h = self.tape.relu(h);
        h = self.sep(h, &format!("{}.sep2", s.name))?;
        h = self.bn(h, &format!("{}.bn2", s.name))?;
        h = self.tape.max_pool2d(h, 3, 2, 1)?;
        let skip = self.tape.conv2d(x, self.p(&format!("{}.skip.weight", s.name)), 2, 0)?;
        let skip = self.bn(skip, &format!("{}.skip.bn", s.name))?;
        Ok(self.tape.add(h, skip)?)
    }

    fn middle(&mut self, x: Var, name: &str) -> Result<Var> {
        let mut h = x;
        for k in 1..=3 {
            h = self.tape.relu(h);
            h = self.sep(h, &format!("{name}.sep{k}"))?;
            h = self.bn(h, &format!("{name}.bn{k}"))?;
        }
        Ok(self.tape.add(h, x)?)
    }

    fn exit(&mut self, x: Var, e: &ExitUnit) -> Result<Var> {
        let mut h = self.stage(x, &e.stage)?;
        for (name, _, _) in &e.sep {
            h = self.sep(h, name)?;
            h = self.bn(h, &format!("{name}.bn"))?;
            h = self.tape.relu(h);
        }
        let pooled = self.tape.global_avg_pool(h)?;
        let (w, b) = (self.p("exit.fc.weight"), self.p("exit.fc.bias"));
        Ok(self.tape.linear(pooled, w, b)?)
    }

    fn plane(&self, kind: InputKind, t: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let Some(t) = t else {
            return contract(format!("missing {kind:?} input"));
        };
        self.check_plane(kind, t)?;
        Ok(t.clone())
    }

    fn check_plane(&self, kind: InputKind, t: &Tensor<T>) -> Result<()> {
        let want = [self.batch, 3, self.size, self.size];
        if t.shape() != want {
            return contract(format!("{kind:?} input has shape {:?}, expected {want:?}", t.shape()));
        }
        Ok(())
    }

    fn input(&mut self, kind: InputKind) -> Result<Var> {
        match kind {
            InputKind::Color => {
                let x = self.plane(kind, self.inputs.color.as_ref())?;
                Ok(self.tape.constant(x))
            }
            InputKind::SpatialNoise => {
                let x = self.plane(kind, self.inputs.spatial.as_ref())?;
                Ok(self.tape.constant(x))
            }
            InputKind::Zero => Ok(self.tape.constant(Tensor::zeros(&[self.batch, 3, self.size, self.size]))),
            InputKind::TemporalNoise => match &self.inputs.temporal {
                None => contract("missing TemporalNoise input"),
                Some(TemporalInput::Plane(p)) => {
                    self.check_plane(kind, p)?;
                    Ok(self.tape.constant(p.clone()))
                }
                Some(TemporalInput::Highpassed(frames)) => {
                    if frames.len() != STACK_LEN {
                        return contract(format!("temporal stack needs {STACK_LEN} high-passed frames, got {}", frames.len()));
                    }
                    for f in frames {
                        self.check_plane(kind, f)?;
                    }
                    let batch = RangeNorm::from_batch(frames.iter(), self.temporal_cfg.norm_eps);
                    let norm = self.temporal_norm.resolve(batch, self.training);
                    let vars: Vec<Var> = frames.iter().map(|f| self.tape.constant(norm.apply(f))).collect();
                    let t = self.p(THRESHOLD_PARAM);
                    let out = threshold_and_filter(self.tape, &vars, t, self.temporal_cfg)?;
                    Ok(out[0])
                }
            },
        }
    }

    fn node(&mut self, node: &PlanNode) -> Result<Var> {
        match node {
            PlanNode::Input(kind) => self.input(*kind),
            PlanNode::Entry { convs, stages, input, .. } => {
                let mut x = self.node(input)?;
                for c in convs {
                    x = self.conv_bn_relu(x, c)?;
                }
                for s in stages {
                    x = self.stage(x, s)?;
                }
                Ok(x)
            }
            PlanNode::Concat { inputs, .. } => {
                let xs = inputs.iter().map(|n| self.node(n)).collect::<Result<Vec<_>>>()?;
                Ok(self.tape.concat_channels(&xs)?)
            }
        }
    }
}

fn kaiming<T: Float>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| T::lit(normal.sample(rng))).collect()).expect("shape matches")
}

struct Builder<T: Float> {
    rng: ChaCha8Rng,
    params: ParamStore<T>,
    bn: HashMap<String, BatchNormState<T>>,
}

impl<T: Float> Builder<T> {
    fn bn(&mut self, name: &str, c: usize) {
        self.params.add(format!("{name}.gamma"), Tensor::full(&[c], T::one()), true);
        self.params.add(format!("{name}.beta"), Tensor::zeros(&[c]), true);
        self.bn.insert(name.to_string(), BatchNormState::new(c));
    }

    fn conv(&mut self, name: &str, cout: usize, cin: usize, k: usize) {
        let w = kaiming(&mut self.rng, &[cout, cin, k, k], cin * k * k);
        self.params.add(name, w, true);
    }

    fn sep(&mut self, name: &str, cin: usize, cout: usize) {
        let dw = kaiming(&mut self.rng, &[cin, 1, 3, 3], 9);
        self.params.add(format!("{name}.depthwise"), dw, true);
        self.conv(&format!("{name}.pointwise"), cout, cin, 1);
    }

    fn stage(&mut self, s: &StageUnit) {
        self.sep(&format!("{}.sep1", s.name), s.cin, s.mid);
        self.bn(&format!("{}.bn1", s.name), s.mid);
        self.sep(&format!("{}.sep2", s.name), s.mid, s.cout);
        self.bn(&format!("{}.bn2", s.name), s.cout);
        self.conv(&format!("{}.skip.weight", s.name), s.cout, s.cin, 1);
        self.bn(&format!("{}.skip.bn", s.name), s.cout);
    }

    fn node(&mut self, node: &PlanNode, temporal_cfg: &TemporalNoiseConfig) {
        match node {
            // The ablated branch keeps the threshold so both temporal variants
            // share one parameter layout.
            PlanNode::Input(InputKind::TemporalNoise | InputKind::Zero) => {
                if self.params.id(THRESHOLD_PARAM).is_none() {
                    self.params.add(THRESHOLD_PARAM, Tensor::scalar(T::lit(temporal_cfg.threshold_init)), false);
                }
            }
            PlanNode::Input(_) => {}
            PlanNode::Entry { convs, stages, input, .. } => {
                self.node(input, temporal_cfg);
                for c in convs {
                    self.conv(&format!("{}.weight", c.name), c.cout, c.cin, 3);
                    self.bn(&format!("{}.bn", c.name), c.cout);
                }
                for s in stages {
                    self.stage(s);
                }
            }
            PlanNode::Concat { inputs, .. } => {
                for n in inputs {
                    self.node(n, temporal_cfg);
                }
            }
        }
    }
}

impl<T: Float> Detector<T> {
    /// Builds and initializes a detector; equal seeds give identical weights.
    pub fn new(spec: &DetectorSpec, seed: u64) -> Result<Self> {
        Self::with_temporal_config(spec, TemporalNoiseConfig::default(), seed)
    }

    pub fn with_temporal_config(spec: &DetectorSpec, temporal_cfg: TemporalNoiseConfig, seed: u64) -> Result<Self> {
        if !(temporal_cfg.threshold_init > 0.0) {
            return contract("temporal threshold must start positive");
        }
        let plan = Plan::compile(spec)?;
        let mut b = Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: ParamStore::new(),
            bn: HashMap::new(),
        };
        b.node(&plan.trunk, &temporal_cfg);
        for (name, w) in &plan.middle {
            for k in 1..=3 {
                b.sep(&format!("{name}.sep{k}"), *w, *w);
                b.bn(&format!("{name}.bn{k}"), *w);
            }
        }
        b.stage(&plan.exit.stage);
        for (name, cin, cout) in &plan.exit.sep {
            b.sep(name, *cin, *cout);
            b.bn(&format!("{name}.bn"), *cout);
        }
        let r3 = plan.exit.sep[1].2;
        let bound = 1.0 / (r3 as f64).sqrt();
        let uni = Uniform::new_inclusive(-bound, bound);
        let k = plan.exit.classes;
        let w = Tensor::from_vec(vec![k, r3], (0..k * r3).map(|_| T::lit(uni.sample(&mut b.rng))).collect())?;
        b.params.add("exit.fc.weight", w, true);
        b.params.add("exit.fc.bias", Tensor::zeros(&[k]), true);
        Ok(Self {
            spec: spec.clone(),
            plan,
            params: b.params,
            bn: b.bn,
            temporal_norm: RangeNormState::default(),
            temporal_cfg,
        })
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn temporal_config(&self) -> &TemporalNoiseConfig {
        &self.temporal_cfg
    }

    pub fn temporal_norm(&self) -> &RangeNormState {
        &self.temporal_norm
    }

    pub fn batch_norm_state(&self, name: &str) -> Option<&BatchNormState<T>> {
        self.bn.get(name)
    }

    pub fn required_inputs(&self) -> BTreeSet<InputKind> {
        self.spec.inputs()
    }

    /// Current temporal threshold, for variants with a temporal stream.
    pub fn threshold(&self) -> Option<f64> {
        self.params.get(THRESHOLD_PARAM).map(|t| t.data()[0].to_f64_lossy())
    }

    /// Index of the temporal threshold in the parameter store.
    pub fn threshold_id(&self) -> Option<usize> {
        self.params.id(THRESHOLD_PARAM)
    }

    /// Re-imposes parameter constraints after an update (threshold stays
    /// positive).
    pub fn apply_constraints(&mut self) {
        if let Some(id) = self.params.id(THRESHOLD_PARAM) {
            let v = &mut self.params.value_mut(id).data_mut()[0];
            if !(*v >= T::lit(MIN_THRESHOLD)) {
                *v = T::lit(MIN_THRESHOLD);
            }
        }
    }

    /// Records the forward pass on `tape`. Training mode uses batch
    /// statistics and updates running ones.
    pub fn forward(&mut self, tape: &mut Tape<T>, inputs: &DetectorInputs<T>, training: bool) -> Result<Forward> {
        let batch = batch_size(inputs)?;
        let vars: Vec<Var> = self.params.values().iter().map(|v| tape.param(v.clone())).collect();
        let mut ctx = Ctx {
            tape,
            params: &self.params,
            vars: &vars,
            bn: &mut self.bn,
            temporal_norm: &mut self.temporal_norm,
            temporal_cfg: &self.temporal_cfg,
            inputs,
            batch,
            size: self.spec.input_size,
            training,
        };
        let x = ctx.node(&self.plan.trunk)?;
        let mut x = x;
        for (name, _) in &self.plan.middle {
            x = ctx.middle(x, name)?;
        }
        let scores = ctx.exit(x, &self.plan.exit)?;
        Ok(Forward { scores, params: vars })
    }

    /// Output of a named trunk node (an entry flow, fusion or input), for
    /// inspection.
    pub fn forward_stream(&mut self, tape: &mut Tape<T>, inputs: &DetectorInputs<T>, training: bool, name: &str) -> Result<Var> {
        let Some(node) = find_node(&self.plan.trunk, name) else {
            return contract(format!("no trunk node named {name:?}"));
        };
        let node = node.clone();
        let batch = batch_size(inputs)?;
        let vars: Vec<Var> = self.params.values().iter().map(|v| tape.param(v.clone())).collect();
        let mut ctx = Ctx {
            tape,
            params: &self.params,
            vars: &vars,
            bn: &mut self.bn,
            temporal_norm: &mut self.temporal_norm,
            temporal_cfg: &self.temporal_cfg,
            inputs,
            batch,
            size: self.spec.input_size,
            training,
        };
        ctx.node(&node)
    }

    /// Evaluation-mode class scores, one `[real, fake]` pair per sample.
    pub fn predict(&mut self, inputs: &DetectorInputs<T>) -> Result<Vec<[T; 2]>> {
        let mut tape = Tape::new();
        let f = self.forward(&mut tape, inputs, false)?;
        Ok(tape.value(f.scores).data().chunks(2).map(|c| [c[0], c[1]]).collect())
    }
}

fn find_node<'a>(node: &'a PlanNode, name: &str) -> Option<&'a PlanNode> {
    match node {
        PlanNode::Input(kind) => (format!("input.{}", format!("{kind:?}").to_lowercase()) == name).then_some(node),
        PlanNode::Entry { name: n, input, .. } => if n == name { Some(node) } else { find_node(input, name) },
        PlanNode::Concat { name: n, inputs, .. } => {
            if n == name {
                Some(node)
            } else {
                inputs.iter().find_map(|i| find_node(i, name))
            }
        }
    }
}

fn batch_size<T: Float>(inputs: &DetectorInputs<T>) -> Result<usize> {
    let mut sizes = Vec::new();
    if let Some(c) = &inputs.color {
        sizes.push(c.shape().first().copied().unwrap_or(0));
    }
    if let Some(s) = &inputs.spatial {
        sizes.push(s.shape().first().copied().unwrap_or(0));
    }
    match &inputs.temporal {
        Some(TemporalInput::Plane(p)) => sizes.push(p.shape().first().copied().unwrap_or(0)),
        Some(TemporalInput::Highpassed(f)) => {
            if let Some(first) = f.first() {
                sizes.push(first.shape().first().copied().unwrap_or(0));
            }
        }
        None => {}
    }
    match sizes.first() {
        None => contract("detector inputs are empty"),
        Some(&n) if n == 0 => contract("empty batch"),
        Some(&n) if sizes.iter().all(|&s| s == n) => Ok(n),
        _ => contract(format!("input batch sizes differ: {sizes:?}")),
    }
}

/// Predicted class with ties resolved towards class 0 ("real").
pub fn argmax2<T: PartialOrd>(s: &[T; 2]) -> usize {
    usize::from(s[1] > s[0])
}

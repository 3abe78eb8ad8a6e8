use super::analytic::AnalyticKind;
use super::{ConstitutiveError, EnergyEval, InvariantMap};
use crate::kinematics::Invariants;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn softplus_inverse(c: f64) -> f64 {
    c + (-(-c).exp_m1()).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ρ(z) = log(1 + e^z) − log 2`.
pub fn shifted_softplus(z: f64) -> f64 {
    softplus(z) - std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnnArchitecture {
    /// Width of each hidden layer; the depth is `neurons.len()`.
    pub neurons: Vec<usize>,
    pub skip: bool,
    pub isochoric: bool,
    pub w_scale: f64,
    pub sigma_init: f64,
}

impl HnnArchitecture {
    pub fn uniform(layers: usize, width: usize, skip: bool, isochoric: bool, w_scale: f64, sigma_init: f64) -> Self {
        Self { neurons: vec![width; layers], skip, isochoric, w_scale, sigma_init }
    }

    pub fn depth(&self) -> usize {
        self.neurons.len()
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        if self.neurons.is_empty() || self.neurons.contains(&0) {
            return Err(ConstitutiveError::InvalidParameters("every layer needs at least one neuron".into()));
        }
        if !(self.w_scale > 0.0 && self.w_scale.is_finite()) {
            return Err(ConstitutiveError::InvalidParameters("W_scale must be positive".into()));
        }
        if !(self.sigma_init > 0.0 && self.sigma_init.is_finite()) {
            return Err(ConstitutiveError::InvalidParameters("sigma_init must be positive".into()));
        }
        Ok(())
    }

    /// Whether layer `i` (0-based) receives the invariants directly.
    pub fn has_inputs(&self, i: usize) -> bool {
        i == 0 || self.skip
    }

    pub fn invariant_map(&self) -> InvariantMap {
        if self.isochoric {
            InvariantMap::IsochoricPow32
        } else {
            InvariantMap::Native
        }
    }

    /// Selected hyperparameters per spatial dimension and ground-truth law.
    pub fn preset(dim: usize, truth: AnalyticKind) -> Option<Self> {
        use AnalyticKind::*;
        let a = match (dim, truth) {
            (2, Ishihara) => Self::uniform(2, 5, false, false, 1.0, 0.6),
            (2, MooneyRivlin) | (2, Fung) => Self::uniform(1, 5, false, false, 10.0, 0.1),
            (3, Ishihara) | (3, MooneyRivlin) => Self::uniform(1, 5, false, false, 10.0, 0.1),
            (3, Fung) => Self::uniform(2, 5, false, true, 1.0, 0.6),
            _ => return None,
        };
        Some(a)
    }
}

/// Named (dimension, law) pair for the preset table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HnnPreset {
    pub dim: usize,
    pub truth: AnalyticKind,
}

impl HnnPreset {
    pub fn architecture(self) -> Option<HnnArchitecture> {
        HnnArchitecture::preset(self.dim, self.truth)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    /// Empty when the layer has no direct invariant inputs.
    pub raw_w_i: Vec<f64>,
    pub raw_w_ii: Vec<f64>,
    pub w_j: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnnParams {
    pub layers: Vec<LayerParams>,
    /// `raw_w_z[i]` connects layer `i` to layer `i + 1`; row-major with
    /// `n_{i+1}` rows and `n_i` columns.
    pub raw_w_z: Vec<Vec<f64>>,
    pub raw_w_out: Vec<f64>,
    pub raw_w_vol: f64,
}

impl HnnParams {
    pub fn zeros(arch: &HnnArchitecture) -> Self {
        let n = &arch.neurons;
        let layers = (0..n.len())
            .map(|i| {
                let k = if arch.has_inputs(i) { n[i] } else { 0 };
                LayerParams { raw_w_i: vec![0.0; k], raw_w_ii: vec![0.0; k], w_j: vec![0.0; k], bias: vec![0.0; n[i]] }
            })
            .collect();
        let raw_w_z = (1..n.len()).map(|i| vec![0.0; n[i] * n[i - 1]]).collect();
        Self { layers, raw_w_z, raw_w_out: vec![0.0; *n.last().unwrap()], raw_w_vol: 0.0 }
    }

    /// Named arrays in the canonical flattening order.
    pub fn named_arrays(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if !l.raw_w_i.is_empty() {
                out.push((format!("layer{}.raw_wI", i + 1), l.raw_w_i.clone()));
                out.push((format!("layer{}.raw_wII", i + 1), l.raw_w_ii.clone()));
                out.push((format!("layer{}.wJ", i + 1), l.w_j.clone()));
            }
            out.push((format!("layer{}.bias", i + 1), l.bias.clone()));
        }
        for (i, w) in self.raw_w_z.iter().enumerate() {
            out.push((format!("layer{}.raw_Wz", i + 1), w.clone()));
        }
        out.push(("raw_w_out".into(), self.raw_w_out.clone()));
        out.push(("raw_w_vol".into(), vec![self.raw_w_vol]));
        out
    }

    pub fn from_named_arrays(arch: &HnnArchitecture, arrays: &[(String, Vec<f64>)]) -> Result<Self, ConstitutiveError> {
        let template = Self::zeros(arch).named_arrays();
        if template.len() != arrays.len() {
            return Err(ConstitutiveError::MalformedCheckpoint(format!(
                "expected {} parameter arrays, found {}",
                template.len(),
                arrays.len()
            )));
        }
        for ((tn, tv), (n, v)) in template.iter().zip(arrays) {
            if tn != n || tv.len() != v.len() {
                return Err(ConstitutiveError::MalformedCheckpoint(format!(
                    "array {n} (len {}) does not match expected {tn} (len {})",
                    v.len(),
                    tv.len()
                )));
            }
        }
        let flat: Vec<f64> = arrays.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        Self::unflatten(arch, &flat).map_err(|e| ConstitutiveError::MalformedCheckpoint(e.to_string()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.named_arrays().into_iter().flat_map(|(_, v)| v).collect()
    }

    pub fn flat_names(&self, _arch: &HnnArchitecture) -> Vec<String> {
        self.named_arrays()
            .into_iter()
            .flat_map(|(n, v)| (0..v.len()).map(move |k| format!("{n}[{k}]")))
            .collect()
    }

    pub fn unflatten(arch: &HnnArchitecture, flat: &[f64]) -> Result<Self, ConstitutiveError> {
        let mut p = Self::zeros(arch);
        let total = p.flatten().len();
        if flat.len() != total {
            return Err(ConstitutiveError::InvalidParameters(format!(
                "expected {total} parameters, got {}",
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        let mut fill = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = it.next().unwrap());
        for l in p.layers.iter_mut() {
            fill(&mut l.raw_w_i);
            fill(&mut l.raw_w_ii);
            fill(&mut l.w_j);
            fill(&mut l.bias);
        }
        for w in p.raw_w_z.iter_mut() {
            fill(w);
        }
        fill(&mut p.raw_w_out);
        let mut last = vec![0.0];
        fill(&mut last);
        p.raw_w_vol = last[0];
        Ok(p)
    }

    fn check_shape(&self, arch: &HnnArchitecture) -> Result<(), ConstitutiveError> {
        let t = Self::zeros(arch).named_arrays();
        let s = self.named_arrays();
        if t.len() != s.len() || t.iter().zip(&s).any(|(a, b)| a.0 != b.0 || a.1.len() != b.1.len()) {
            return Err(ConstitutiveError::InvalidParameters("parameter shapes do not match the architecture".into()));
        }
        if self.flatten().iter().any(|x| !x.is_finite()) {
            return Err(ConstitutiveError::InvalidParameters("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Gaussian raw weights, zero biases and zero `raw_w_vol`.
pub fn init_params(arch: &HnnArchitecture, seed: u64) -> HnnParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, arch.sigma_init).expect("sigma_init must be positive");
    let mut p = HnnParams::zeros(arch);
    let mut draw = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
    for l in p.layers.iter_mut() {
        draw(&mut l.raw_w_i);
        draw(&mut l.raw_w_ii);
        draw(&mut l.w_j);
    }
    for w in p.raw_w_z.iter_mut() {
        draw(w);
    }
    draw(&mut p.raw_w_out);
    p
}

#[derive(Debug, Clone, PartialEq)]
struct Effective {
    w_in: Vec<Option<[Vec<f64>; 3]>>,
    bias: Vec<Vec<f64>>,
    w_z: Vec<Vec<f64>>,
    w_out: Vec<f64>,
    w_vol: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Offsets {
    w_in: Vec<Option<[usize; 3]>>,
    bias: Vec<usize>,
    w_z: Vec<usize>,
    w_out: usize,
    w_vol: usize,
}

/// An HNN with its derived quantities (effective weights, `ω`, `W0`)
/// computed from the raw parameters at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Hnn {
    arch: HnnArchitecture,
    params: HnnParams,
    eff: Effective,
    off: Offsets,
    map: InvariantMap,
    x_ref: Vector3<f64>,
    omega: f64,
    w0: f64,
    omega_grad: Vec<f64>,
    n_params: usize,
}

struct Tape {
    a: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl Hnn {
    pub fn new(arch: HnnArchitecture, params: HnnParams) -> Result<Self, ConstitutiveError> {
        arch.validate()?;
        params.check_shape(&arch)?;
        let n = &arch.neurons;
        let mut w_in = Vec::new();
        let mut bias = Vec::new();
        let mut off_in = Vec::new();
        let mut off_b = Vec::new();
        let mut pos = 0;
        for l in &params.layers {
            if l.raw_w_i.is_empty() {
                w_in.push(None);
                off_in.push(None);
            } else {
                let k = l.raw_w_i.len();
                w_in.push(Some([
                    l.raw_w_i.iter().map(|&r| softplus(r)).collect(),
                    l.raw_w_ii.iter().map(|&r| softplus(r)).collect(),
                    l.w_j.clone(),
                ]));
                off_in.push(Some([pos, pos + k, pos + 2 * k]));
                pos += 3 * k;
            }
            bias.push(l.bias.clone());
            off_b.push(pos);
            pos += l.bias.len();
        }
        let mut w_z = Vec::new();
        let mut off_z = Vec::new();
        for (i, raw) in params.raw_w_z.iter().enumerate() {
            let fan_in = n[i] as f64;
            w_z.push(raw.iter().map(|&r| softplus(r) / fan_in).collect());
            off_z.push(pos);
            pos += raw.len();
        }
        let nl = *n.last().unwrap() as f64;
        let w_out = params.raw_w_out.iter().map(|&r| softplus(r) / nl).collect();
        let off_out = pos;
        pos += params.raw_w_out.len();
        let off_vol = pos;
        pos += 1;
        let map = arch.invariant_map();
        let x_ref = map.map(Invariants::REFERENCE).u;
        let mut hnn = Hnn {
            eff: Effective { w_in, bias, w_z, w_out, w_vol: softplus(params.raw_w_vol) },
            off: Offsets { w_in: off_in, bias: off_b, w_z: off_z, w_out: off_out, w_vol: off_vol },
            arch,
            params,
            map,
            x_ref,
            omega: 0.0,
            w0: 0.0,
            omega_grad: Vec::new(),
            n_params: pos,
        };
        let m = map.map(Invariants::REFERENCE);
        let base = InvariantMap::pull_back(&m, &hnn.base_forward(&Vector3::zeros()));
        hnn.w0 = base.w;
        hnn.omega = -(2.0 * base.dw[0] + 4.0 * base.dw[1] + base.dw[2]);
        let mut og = vec![0.0; pos];
        let c = m.jac * Vector3::new(-2.0, -4.0, -1.0);
        hnn.base_reverse(&Vector3::zeros(), &c, &mut og);
        hnn.omega_grad = og;
        Ok(hnn)
    }

    pub fn from_init(arch: HnnArchitecture, seed: u64) -> Result<Self, ConstitutiveError> {
        arch.validate()?;
        let p = init_params(&arch, seed);
        Self::new(arch, p)
    }

    pub fn arch(&self) -> &HnnArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &HnnParams {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn w_vol(&self) -> f64 {
        self.eff.w_vol
    }

    fn shifted_inputs(&self, inv: Invariants) -> (super::invariant_map::MappedInvariants, Vector3<f64>) {
        let m = self.map.map(inv);
        let x = m.u - self.x_ref;
        (m, x)
    }

    /// Network output with exact input derivatives, in shifted mapped
    /// variables.
    fn base_forward(&self, x: &Vector3<f64>) -> EnergyEval {
        let n = &self.arch.neurons;
        let mut z_prev: Vec<f64> = Vec::new();
        let mut dz_prev: Vec<[f64; 3]> = Vec::new();
        let mut d2z_prev: Vec<[f64; 9]> = Vec::new();
        for i in 0..n.len() {
            let ni = n[i];
            let mut a = self.eff.bias[i].clone();
            let mut da = vec![[0.0; 3]; ni];
            let mut d2a = vec![[0.0; 9]; ni];
            if let Some(w) = &self.eff.w_in[i] {
                for r in 0..ni {
                    a[r] += w[0][r] * x[0] + w[1][r] * x[1] + w[2][r] * x[2];
                    da[r] = [w[0][r], w[1][r], w[2][r]];
                }
            }
            if i > 0 {
                let np = n[i - 1];
                let wz = &self.eff.w_z[i - 1];
                for r in 0..ni {
                    for c in 0..np {
                        let w = wz[r * np + c];
                        a[r] += w * z_prev[c];
                        for k in 0..3 {
                            da[r][k] += w * dz_prev[c][k];
                        }
                        for k in 0..9 {
                            d2a[r][k] += w * d2z_prev[c][k];
                        }
                    }
                }
            }
            let mut z = vec![0.0; ni];
            let mut dz = vec![[0.0; 3]; ni];
            let mut d2z = vec![[0.0; 9]; ni];
            for r in 0..ni {
                let s = sigmoid(a[r]);
                let s2 = s * (1.0 - s);
                z[r] = shifted_softplus(a[r]);
                for k in 0..3 {
                    dz[r][k] = s * da[r][k];
                }
                for p in 0..3 {
                    for q in 0..3 {
                        d2z[r][3 * p + q] = s2 * da[r][p] * da[r][q] + s * d2a[r][3 * p + q];
                    }
                }
            }
            z_prev = z;
            dz_prev = dz;
            d2z_prev = d2z;
        }
        let ws = self.arch.w_scale;
        let mut e = EnergyEval::zero();
        for (r, &wo) in self.eff.w_out.iter().enumerate() {
            let c = ws * wo;
            e.w += c * z_prev[r];
            for k in 0..3 {
                e.dw[k] += c * dz_prev[r][k];
            }
            for p in 0..3 {
                for q in 0..3 {
                    e.d2w[(p, q)] += c * d2z_prev[r][3 * p + q];
                }
            }
        }
        e
    }

    fn tape(&self, x: &Vector3<f64>, c: &Vector3<f64>) -> Tape {
        let n = &self.arch.neurons;
        let mut tape = Tape { a: Vec::new(), z: Vec::new(), t: Vec::new(), s: Vec::new() };
        for i in 0..n.len() {
            let ni = n[i];
            let mut a = self.eff.bias[i].clone();
            let mut t = vec![0.0; ni];
            if let Some(w) = &self.eff.w_in[i] {
                for r in 0..ni {
                    a[r] += w[0][r] * x[0] + w[1][r] * x[1] + w[2][r] * x[2];
                    t[r] = w[0][r] * c[0] + w[1][r] * c[1] + w[2][r] * c[2];
                }
            }
            if i > 0 {
                let np = n[i - 1];
                let wz = &self.eff.w_z[i - 1];
                for r in 0..ni {
                    for q in 0..np {
                        let w = wz[r * np + q];
                        a[r] += w * tape.z[i - 1][q];
                        t[r] += w * tape.s[i - 1][q];
                    }
                }
            }
            let z = a.iter().map(|&v| shifted_softplus(v)).collect();
            let s = a.iter().zip(&t).map(|(&v, &tv)| sigmoid(v) * tv).collect();
            tape.a.push(a);
            tape.z.push(z);
            tape.t.push(t);
            tape.s.push(s);
        }
        tape
    }

    /// Accumulates `∂/∂θ [∇_x W_base · c]` at `x` into `out`.
    fn base_reverse(&self, x: &Vector3<f64>, c: &Vector3<f64>, out: &mut [f64]) {
        let n = &self.arch.neurons;
        let l = n.len();
        let tape = self.tape(x, c);
        let ws = self.arch.w_scale;
        let nl = n[l - 1] as f64;
        let mut s_bar: Vec<f64> = self.eff.w_out.iter().map(|&w| ws * w).collect();
        let mut z_bar = vec![0.0; n[l - 1]];
        for (r, &raw) in self.params.raw_w_out.iter().enumerate() {
            out[self.off.w_out + r] += ws * tape.s[l - 1][r] * sigmoid(raw) / nl;
        }
        for i in (0..l).rev() {
            let ni = n[i];
            let mut t_bar = vec![0.0; ni];
            let mut a_bar = vec![0.0; ni];
            for r in 0..ni {
                let sg = sigmoid(tape.a[i][r]);
                t_bar[r] = s_bar[r] * sg;
                a_bar[r] = s_bar[r] * sg * (1.0 - sg) * tape.t[i][r] + z_bar[r] * sg;
            }
            if let Some(o) = self.off.w_in[i] {
                let lp = &self.params.layers[i];
                for r in 0..ni {
                    let gi = t_bar[r] * c[0] + a_bar[r] * x[0];
                    let gii = t_bar[r] * c[1] + a_bar[r] * x[1];
                    let gj = t_bar[r] * c[2] + a_bar[r] * x[2];
                    out[o[0] + r] += gi * sigmoid(lp.raw_w_i[r]);
                    out[o[1] + r] += gii * sigmoid(lp.raw_w_ii[r]);
                    out[o[2] + r] += gj;
                }
            }
            for r in 0..ni {
                out[self.off.bias[i] + r] += a_bar[r];
            }
            if i > 0 {
                let np = n[i - 1];
                let wz = &self.eff.w_z[i - 1];
                let raw = &self.params.raw_w_z[i - 1];
                let o = self.off.w_z[i - 1];
                let mut s_prev = vec![0.0; np];
                let mut z_prev = vec![0.0; np];
                for r in 0..ni {
                    for q in 0..np {
                        let k = r * np + q;
                        let g = t_bar[r] * tape.s[i - 1][q] + a_bar[r] * tape.z[i - 1][q];
                        out[o + k] += g * sigmoid(raw[k]) / np as f64;
                        s_prev[q] += wz[k] * t_bar[r];
                        z_prev[q] += wz[k] * a_bar[r];
                    }
                }
                s_bar = s_prev;
                z_bar = z_prev;
            }
        }
    }

    /// Network part `W_base` with derivatives in `(I1, I2, J)`.
    pub fn base_energy(&self, inv: Invariants) -> EnergyEval {
        let (m, x) = self.shifted_inputs(inv);
        InvariantMap::pull_back(&m, &self.base_forward(&x))
    }

    pub fn energy(&self, inv: Invariants) -> EnergyEval {
        let mut e = self.base_energy(inv);
        let j = inv.j;
        let lj = j.ln();
        let wv = self.eff.w_vol;
        e.w += 0.5 * wv * (j - 1.0) * lj + self.omega * (j - 1.0) - self.w0;
        e.dw[2] += 0.5 * wv * (lj + (j - 1.0) / j) + self.omega;
        e.d2w[(2, 2)] += 0.5 * wv * (1.0 / j + 1.0 / (j * j));
        e
    }

    pub fn accumulate_seeded_param_gradient(&self, inv: Invariants, seed: [f64; 3], out: &mut [f64]) {
        let (m, x) = self.shifted_inputs(inv);
        let q = Vector3::from(seed);
        let c = m.jac * q;
        self.base_reverse(&x, &c, out);
        if seed[2] != 0.0 {
            for (o, g) in out.iter_mut().zip(&self.omega_grad) {
                *o += seed[2] * g;
            }
            let j = inv.j;
            out[self.off.w_vol] += seed[2] * sigmoid(self.params.raw_w_vol) * 0.5 * (j.ln() + (j - 1.0) / j);
        }
    }
}

/// `W_base` of the network alone, derivatives in `(I1, I2, J)`.
pub fn pnn_forward(arch: &HnnArchitecture, params: &HnnParams, inv: Invariants) -> Result<EnergyEval, ConstitutiveError> {
    Ok(Hnn::new(arch.clone(), params.clone())?.base_energy(inv))
}

pub fn hnn_energy(arch: &HnnArchitecture, params: &HnnParams, inv: Invariants) -> Result<EnergyEval, ConstitutiveError> {
    if !(inv.j > 0.0) {
        return Err(crate::kinematics::KinematicsError::NonPositiveJacobian(inv.j).into());
    }
    Ok(Hnn::new(arch.clone(), params.clone())?.energy(inv))
}

use super::analytic::{AnalyticKind, AnalyticModel};
use super::hnn::{Hnn, HnnArchitecture, HnnParams};
use super::{ConstitutiveError, ConstitutiveModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointMeta {
    pub seed: Option<u64>,
    pub created_by: String,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureRecord {
    #[serde(rename = "L")]
    pub l: usize,
    pub n: Vec<usize>,
    pub skip: bool,
    pub isochoric: bool,
    #[serde(rename = "W_scale")]
    pub w_scale: String,
    pub sigma_init: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub name: String,
    pub values: Vec<String>,
}

/// On-disk document. Doubles are stored as 16-digit hex of their IEEE-754
/// bit pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub model_kind: String,
    pub architecture: Option<ArchitectureRecord>,
    pub raw_params: Vec<ParamArray>,
    pub seed: Option<u64>,
    pub created_by: String,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

pub fn hex_f64(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub fn parse_hex_f64(s: &str) -> Result<f64, ConstitutiveError> {
    if s.len() != 16 {
        return Err(ConstitutiveError::MalformedCheckpoint(format!("bad hex double {s:?}")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| ConstitutiveError::MalformedCheckpoint(format!("bad hex double {s:?}")))
}

fn encode(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| hex_f64(x)).collect()
}

fn decode(v: &[String]) -> Result<Vec<f64>, ConstitutiveError> {
    v.iter().map(|s| parse_hex_f64(s)).collect()
}

impl Checkpoint {
    pub fn from_model(model: &ConstitutiveModel, meta: &CheckpointMeta) -> Self {
        let (model_kind, architecture, raw_params) = match model {
            ConstitutiveModel::Analytic(m) => {
                let raw = m.raw_params();
                let arrays = m
                    .kind
                    .coefficient_names()
                    .iter()
                    .zip(&raw)
                    .map(|(n, r)| ParamArray { name: format!("raw_{n}"), values: vec![hex_f64(*r)] })
                    .collect();
                (m.kind.tag().to_string(), None, arrays)
            }
            ConstitutiveModel::Hnn(h) => {
                let a = h.arch();
                let arch = ArchitectureRecord {
                    l: a.depth(),
                    n: a.neurons.clone(),
                    skip: a.skip,
                    isochoric: a.isochoric,
                    w_scale: hex_f64(a.w_scale),
                    sigma_init: hex_f64(a.sigma_init),
                };
                let arrays = h
                    .params()
                    .named_arrays()
                    .into_iter()
                    .map(|(name, v)| ParamArray { name, values: encode(&v) })
                    .collect();
                ("hnn".to_string(), Some(arch), arrays)
            }
        };
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            model_kind,
            architecture,
            raw_params,
            seed: meta.seed,
            created_by: meta.created_by.clone(),
            provenance: meta.provenance.clone(),
        }
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta { seed: self.seed, created_by: self.created_by.clone(), provenance: self.provenance.clone() }
    }

    pub fn to_model(&self) -> Result<ConstitutiveModel, ConstitutiveError> {
        let bad = |m: String| ConstitutiveError::MalformedCheckpoint(m);
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema version {}", self.schema_version)));
        }
        if self.model_kind == "hnn" {
            let rec = self.architecture.as_ref().ok_or_else(|| bad("hnn checkpoint without architecture".into()))?;
            if rec.l != rec.n.len() {
                return Err(bad(format!("L = {} but {} layer widths given", rec.l, rec.n.len())));
            }
            let arch = HnnArchitecture {
                neurons: rec.n.clone(),
                skip: rec.skip,
                isochoric: rec.isochoric,
                w_scale: parse_hex_f64(&rec.w_scale)?,
                sigma_init: parse_hex_f64(&rec.sigma_init)?,
            };
            arch.validate().map_err(|e| bad(e.to_string()))?;
            let arrays = self
                .raw_params
                .iter()
                .map(|a| Ok((a.name.clone(), decode(&a.values)?)))
                .collect::<Result<Vec<_>, ConstitutiveError>>()?;
            let params = HnnParams::from_named_arrays(&arch, &arrays)?;
            let h = Hnn::new(arch, params).map_err(|e| bad(e.to_string()))?;
            return Ok(h.into());
        }
        let kind = AnalyticKind::from_tag(&self.model_kind).ok_or_else(|| bad(format!("unknown model kind {:?}", self.model_kind)))?;
        let names = kind.coefficient_names();
        if self.raw_params.len() != names.len() {
            return Err(bad(format!("{} expects {} coefficients, found {}", kind.tag(), names.len(), self.raw_params.len())));
        }
        let mut raw = Vec::new();
        for (a, n) in self.raw_params.iter().zip(names) {
            if a.name != format!("raw_{n}") || a.values.len() != 1 {
                return Err(bad(format!("unexpected coefficient entry {}", a.name)));
            }
            raw.push(parse_hex_f64(&a.values[0])?);
        }
        let template = AnalyticModel::with_defaults(kind);
        let m = template.with_raw_params(&raw).map_err(|e| bad(e.to_string()))?;
        Ok(m.into())
    }
}

pub fn serialize_model(model: &ConstitutiveModel, meta: &CheckpointMeta) -> Vec<u8> {
    let c = Checkpoint::from_model(model, meta);
    serde_json::to_vec_pretty(&c).expect("checkpoint serialization cannot fail")
}

pub fn deserialize_model(bytes: &[u8]) -> Result<(ConstitutiveModel, CheckpointMeta), ConstitutiveError> {
    let c: Checkpoint =
        serde_json::from_slice(bytes).map_err(|e| ConstitutiveError::MalformedCheckpoint(e.to_string()))?;
    let m = c.to_model()?;
    Ok((m, c.meta()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        for x in [0.0, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE, -1e300] {
            assert_eq!(parse_hex_f64(&hex_f64(x)).unwrap().to_bits(), x.to_bits());
        }
        assert!(parse_hex_f64("zz").is_err());
    }

    #[test]
    fn mr_checkpoint_schema() {
        let m: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::MooneyRivlin).into();
        let bytes = serialize_model(&m, &CheckpointMeta::default());
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["model_kind"], "mr");
        assert_eq!(v["raw_params"].as_array().unwrap().len(), 3);
        assert!(v["architecture"].is_null());
    }
}

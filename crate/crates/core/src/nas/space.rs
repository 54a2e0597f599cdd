use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abc::SearchDomain;
use crate::error::{Error, Result};
use crate::rng::ColonyRng;

/// Token separator of canonical encodings.
pub const SEPARATOR: char = '|';

#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Conv {
        filters: usize,
        kernel: usize,
    },
    /// 2x2 max pooling, stride 2.
    MaxPool,
    Dense {
        units: usize,
    },
    Dropout {
        rate: f64,
    },
    Identity,
    /// conv -> conv with an identity (or 1x1 projection) skip connection.
    ResidualBlock {
        filters: usize,
    },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Conv { .. } => "conv",
            OpKind::MaxPool => "maxpool",
            OpKind::Dense { .. } => "dense",
            OpKind::Dropout { .. } => "dropout",
            OpKind::Identity => "identity",
            OpKind::ResidualBlock { .. } => "residual_block",
        }
    }
}

/// One searchable operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperationRecord", into = "OperationRecord")]
pub struct OperationSpec {
    pub id: String,
    pub kind: OpKind,
}

/// Flat on-disk form of an [`OperationSpec`], as written in run configs:
/// `{ id = "conv3x32", kind = "conv", filters = 32, kernel = 3 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationRecord {
    pub id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

impl OperationSpec {
    pub fn new(id: impl Into<String>, kind: OpKind) -> Result<Self> {
        let spec = OperationSpec {
            id: id.into(),
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(SEPARATOR) || self.id.trim() != self.id {
            return Err(Error::Config(format!(
                "invalid operation id {:?}: must be non-empty and free of '{SEPARATOR}' and surrounding whitespace",
                self.id
            )));
        }
        let bad = |what: &str| Err(Error::Config(format!("operation {}: {what}", self.id)));
        match self.kind {
            OpKind::Conv { filters, kernel } if filters == 0 || kernel == 0 => {
                bad("conv needs filters >= 1 and kernel >= 1")
            }
            OpKind::Dense { units: 0 } => bad("dense needs units >= 1"),
            OpKind::Dropout { rate } if !(rate > 0.0 && rate < 1.0) => {
                bad("dropout rate must lie in (0, 1)")
            }
            OpKind::ResidualBlock { filters: 0 } => bad("residual_block needs filters >= 1"),
            _ => Ok(()),
        }
    }
}

impl TryFrom<OperationRecord> for OperationSpec {
    type Error = Error;

    fn try_from(r: OperationRecord) -> Result<Self> {
        let id = r.id.clone();
        let need = |v: Option<usize>, field: &str| {
            v.ok_or_else(|| Error::Config(format!("operation {id}: `{field}` is required")))
        };
        let reject = |present: bool, field: &str| {
            if present {
                Err(Error::Config(format!(
                    "operation {id}: `{field}` is not valid for kind `{}`",
                    r.kind
                )))
            } else {
                Ok(())
            }
        };
        let kind = match r.kind.as_str() {
            "conv" => {
                reject(r.units.is_some(), "units")?;
                reject(r.rate.is_some(), "rate")?;
                OpKind::Conv {
                    filters: need(r.filters, "filters")?,
                    kernel: need(r.kernel, "kernel")?,
                }
            }
            "dense" => {
                reject(r.filters.is_some(), "filters")?;
                reject(r.kernel.is_some(), "kernel")?;
                reject(r.rate.is_some(), "rate")?;
                OpKind::Dense {
                    units: need(r.units, "units")?,
                }
            }
            "residual_block" => {
                reject(r.units.is_some(), "units")?;
                reject(r.kernel.is_some(), "kernel")?;
                reject(r.rate.is_some(), "rate")?;
                OpKind::ResidualBlock {
                    filters: need(r.filters, "filters")?,
                }
            }
            "dropout" => {
                reject(r.filters.is_some(), "filters")?;
                reject(r.kernel.is_some(), "kernel")?;
                reject(r.units.is_some(), "units")?;
                OpKind::Dropout {
                    rate: r.rate.ok_or_else(|| {
                        Error::Config(format!("operation {id}: `rate` is required"))
                    })?,
                }
            }
            "maxpool" | "identity" => {
                reject(r.filters.is_some(), "filters")?;
                reject(r.kernel.is_some(), "kernel")?;
                reject(r.units.is_some(), "units")?;
                reject(r.rate.is_some(), "rate")?;
                if r.kind == "maxpool" {
                    OpKind::MaxPool
                } else {
                    OpKind::Identity
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "operation {id}: unknown kind `{other}`"
                )))
            }
        };
        OperationSpec::new(r.id, kind)
    }
}

impl From<OperationSpec> for OperationRecord {
    fn from(spec: OperationSpec) -> Self {
        let mut r = OperationRecord {
            id: spec.id,
            kind: spec.kind.name().to_owned(),
            filters: None,
            kernel: None,
            units: None,
            rate: None,
        };
        match spec.kind {
            OpKind::Conv { filters, kernel } => {
                r.filters = Some(filters);
                r.kernel = Some(kernel);
            }
            OpKind::Dense { units } => r.units = Some(units),
            OpKind::Dropout { rate } => r.rate = Some(rate),
            OpKind::ResidualBlock { filters } => r.filters = Some(filters),
            OpKind::MaxPool | OpKind::Identity => {}
        }
        r
    }
}

/// A candidate architecture: one token per layer slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub struct ArchitectureEncoding {
    ops: Vec<String>,
}

impl ArchitectureEncoding {
    pub fn new(ops: Vec<String>) -> Self {
        ArchitectureEncoding { ops }
    }

    pub fn ops(&self) -> &[String] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Number of slots where the two encodings differ.
    pub fn hamming(&self, other: &ArchitectureEncoding) -> usize {
        self.ops
            .iter()
            .zip(&other.ops)
            .filter(|(a, b)| a != b)
            .count()
            + self.ops.len().abs_diff(other.ops.len())
    }
}

impl fmt::Display for ArchitectureEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&encode(self))
    }
}

impl From<ArchitectureEncoding> for String {
    fn from(a: ArchitectureEncoding) -> String {
        encode(&a)
    }
}

impl From<String> for ArchitectureEncoding {
    fn from(s: String) -> Self {
        ArchitectureEncoding {
            ops: s.split(SEPARATOR).map(str::to_owned).collect(),
        }
    }
}

/// Canonical string form: tokens joined by [`SEPARATOR`].
pub fn encode(arch: &ArchitectureEncoding) -> String {
    arch.ops.join(&SEPARATOR.to_string())
}

/// Parses a canonical string against `space`.
pub fn decode(space: &ArchitectureSpace, text: &str) -> Result<ArchitectureEncoding> {
    let tokens: Vec<&str> = text.split(SEPARATOR).collect();
    for (i, token) in tokens.iter().enumerate() {
        if !space.index.contains_key(*token) {
            return Err(Error::Parse {
                position: i,
                message: format!("unknown operation token `{token}`"),
            });
        }
    }
    if tokens.len() != space.depth {
        return Err(Error::Parse {
            position: tokens.len().min(space.depth),
            message: format!("expected {} tokens, found {}", space.depth, tokens.len()),
        });
    }
    Ok(ArchitectureEncoding::new(
        tokens.into_iter().map(str::to_owned).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureSpace {
    depth: usize,
    vocabulary: Vec<OperationSpec>,
    index: HashMap<String, usize>,
}

impl ArchitectureSpace {
    pub fn new(depth: usize, vocabulary: Vec<OperationSpec>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("space depth must be at least 1".into()));
        }
        if vocabulary.is_empty() {
            return Err(Error::Config("operation vocabulary is empty".into()));
        }
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (i, op) in vocabulary.iter().enumerate() {
            op.validate()?;
            if index.insert(op.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate operation id `{}`", op.id)));
            }
        }
        Ok(ArchitectureSpace {
            depth,
            vocabulary,
            index,
        })
    }

    /// The ten-operation default vocabulary: three convolutions, max
    /// pooling, two dense layers, dropout, identity and two residual blocks.
    pub fn default_vocabulary() -> Vec<OperationSpec> {
        use OpKind::*;
        [
            (
                "conv3x16",
                Conv {
                    filters: 16,
                    kernel: 3,
                },
            ),
            (
                "conv3x32",
                Conv {
                    filters: 32,
                    kernel: 3,
                },
            ),
            (
                "conv3x64",
                Conv {
                    filters: 64,
                    kernel: 3,
                },
            ),
            ("maxpool2", MaxPool),
            ("dense64", Dense { units: 64 }),
            ("dense128", Dense { units: 128 }),
            ("dropout0.3", Dropout { rate: 0.3 }),
            ("identity", Identity),
            ("res32", ResidualBlock { filters: 32 }),
            ("res64", ResidualBlock { filters: 64 }),
        ]
        .into_iter()
        .map(|(id, kind)| OperationSpec {
            id: id.to_owned(),
            kind,
        })
        .collect()
    }

    pub fn with_default_vocabulary(depth: usize) -> Result<Self> {
        Self::new(depth, Self::default_vocabulary())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vocabulary(&self) -> &[OperationSpec] {
        &self.vocabulary
    }

    pub fn operation(&self, token: &str) -> Option<&OperationSpec> {
        self.index.get(token).map(|&i| &self.vocabulary[i])
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// `V^depth`, or `None` on overflow.
    pub fn cardinality(&self) -> Option<u128> {
        (self.vocabulary.len() as u128).checked_pow(self.depth as u32)
    }

    pub fn contains(&self, arch: &ArchitectureEncoding) -> bool {
        arch.len() == self.depth && arch.ops.iter().all(|t| self.index.contains_key(t))
    }

    /// Every slot filled with a uniformly drawn token.
    pub fn random_architecture(&self, rng: &mut ColonyRng) -> ArchitectureEncoding {
        let ops = (0..self.depth)
            .map(|_| self.vocabulary[rng.index(self.vocabulary.len())].id.clone())
            .collect();
        ArchitectureEncoding { ops }
    }

    /// Changes exactly one uniformly chosen slot to a different, uniformly
    /// chosen token.
    pub fn neighbor_architecture(
        &self,
        arch: &ArchitectureEncoding,
        rng: &mut ColonyRng,
    ) -> Result<ArchitectureEncoding> {
        if self.vocabulary.len() < 2 {
            return Err(Error::Domain(
                "no neighbors exist in a single-operation vocabulary".into(),
            ));
        }
        if !self.contains(arch) {
            return Err(Error::Domain(format!(
                "`{}` is not a member of this space",
                encode(arch)
            )));
        }
        let slot = rng.index(self.depth);
        let current = self.index[&arch.ops[slot]];
        let mut replacement = rng.index(self.vocabulary.len() - 1);
        if replacement >= current {
            replacement += 1;
        }
        let mut ops = arch.ops.clone();
        ops[slot] = self.vocabulary[replacement].id.clone();
        Ok(ArchitectureEncoding { ops })
    }

    /// All `V^depth` encodings in lexicographic vocabulary order.
    pub fn enumerate_all(&self) -> impl Iterator<Item = ArchitectureEncoding> + '_ {
        let v = self.vocabulary.len();
        let total = self.cardinality().expect("space too large to enumerate");
        (0..total).map(move |mut n| {
            let mut ops = vec![String::new(); self.depth];
            for slot in (0..self.depth).rev() {
                ops[slot] = self.vocabulary[(n % v as u128) as usize].id.clone();
                n /= v as u128;
            }
            ArchitectureEncoding { ops }
        })
    }
}

impl SearchDomain for ArchitectureSpace {
    type Position = ArchitectureEncoding;

    fn random_position(&self, rng: &mut ColonyRng) -> ArchitectureEncoding {
        self.random_architecture(rng)
    }

    fn neighbor(
        &self,
        position: &ArchitectureEncoding,
        _partner: Option<&ArchitectureEncoding>,
        rng: &mut ColonyRng,
    ) -> Result<ArchitectureEncoding> {
        self.neighbor_architecture(position, rng)
    }

    fn key(&self, position: &ArchitectureEncoding) -> String {
        encode(position)
    }
}

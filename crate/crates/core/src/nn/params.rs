//! Flat parameter storage for the single-layer LSTM regressor.
//!
//! The fused gate matrices stack the four gates in the order
//! (forget, input, candidate, output): rows `[0, H)` belong to the forget
//! gate, `[H, 2H)` to the input gate, and so on. Matrices are row-major.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CelError, Result};

/// Names of the six parameter groups, in storage order.
pub const GROUP_NAMES: [&str; 6] = [
    "lstm.weight_ih_l0",
    "lstm.weight_hh_l0",
    "lstm.bias_ih_l0",
    "lstm.bias_hh_l0",
    "linear.weight",
    "linear.bias",
];

/// Number of gates in an LSTM cell.
pub const GATES: usize = 4;

/// Gate slots inside the fused `4·H` dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub fn name(self) -> &'static str {
        match self {
            Gate::Forget => "forget",
            Gate::Input => "input",
            Gate::Candidate => "candidate",
            Gate::Output => "output",
        }
    }
}

/// A set of tensors laid out like the model's parameters.
///
/// The same layout carries parameters, gradients, Adam moments and the
/// diagonal Fisher estimate, so all of them share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensors {
    hidden_dim: usize,
    input_dim: usize,
    /// `(4H, D)` input-to-hidden weights.
    pub weight_ih: Vec<f64>,
    /// `(4H, H)` hidden-to-hidden weights.
    pub weight_hh: Vec<f64>,
    pub bias_ih: Vec<f64>,
    pub bias_hh: Vec<f64>,
    /// Output head, length `H`.
    pub linear_weight: Vec<f64>,
    /// Output bias, always length 1.
    pub linear_bias: Vec<f64>,
}

pub type ParameterSet = ParamTensors;
pub type GradientSet = ParamTensors;

/// Total scalar count for a model with `hidden_dim` units and `input_dim` inputs.
pub fn parameter_count(hidden_dim: usize, input_dim: usize) -> usize {
    let h = hidden_dim;
    let d = input_dim;
    GATES * h * d + GATES * h * h + 2 * GATES * h + h + 1
}

impl ParamTensors {
    pub fn zeros(hidden_dim: usize, input_dim: usize) -> Self {
        let g = GATES * hidden_dim;
        Self {
            hidden_dim,
            input_dim,
            weight_ih: vec![0.0; g * input_dim],
            weight_hh: vec![0.0; g * hidden_dim],
            bias_ih: vec![0.0; g],
            bias_hh: vec![0.0; g],
            linear_weight: vec![0.0; hidden_dim],
            linear_bias: vec![0.0; 1],
        }
    }

    /// Uniform(−1/√H, 1/√H) initialization from a seeded ChaCha8 stream.
    ///
    /// Groups are filled in storage order, so a given `(H, D, seed)` always
    /// yields the same bits.
    pub fn init(hidden_dim: usize, input_dim: usize, seed: u64) -> Result<Self> {
        if hidden_dim == 0 || input_dim == 0 {
            return Err(CelError::InvalidArgument(format!(
                "hidden_dim and input_dim must be >= 1 (got {hidden_dim}, {input_dim})"
            )));
        }
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(hidden_dim, input_dim);
        for (_, group) in params.groups_mut() {
            for w in group.iter_mut() {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden_dim, self.input_dim)
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        parameter_count(self.hidden_dim, self.input_dim)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn groups(&self) -> [(&'static str, &[f64]); 6] {
        [
            (GROUP_NAMES[0], &self.weight_ih),
            (GROUP_NAMES[1], &self.weight_hh),
            (GROUP_NAMES[2], &self.bias_ih),
            (GROUP_NAMES[3], &self.bias_hh),
            (GROUP_NAMES[4], &self.linear_weight),
            (GROUP_NAMES[5], &self.linear_bias),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 6] {
        [
            (GROUP_NAMES[0], &mut self.weight_ih),
            (GROUP_NAMES[1], &mut self.weight_hh),
            (GROUP_NAMES[2], &mut self.bias_ih),
            (GROUP_NAMES[3], &mut self.bias_hh),
            (GROUP_NAMES[4], &mut self.linear_weight),
            (GROUP_NAMES[5], &mut self.linear_bias),
        ]
    }

    /// All scalars in storage order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.weight_ih
            .iter()
            .chain(&self.weight_hh)
            .chain(&self.bias_ih)
            .chain(&self.bias_hh)
            .chain(&self.linear_weight)
            .chain(&self.linear_bias)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weight_ih
            .iter_mut()
            .chain(self.weight_hh.iter_mut())
            .chain(self.bias_ih.iter_mut())
            .chain(self.bias_hh.iter_mut())
            .chain(self.linear_weight.iter_mut())
            .chain(self.linear_bias.iter_mut())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    /// Scalar at flat index `idx` (storage order).
    pub fn get_flat(&self, idx: usize) -> f64 {
        *self.iter().nth(idx).expect("flat index out of range")
    }

    pub fn set_flat(&mut self, idx: usize, value: f64) {
        *self.iter_mut().nth(idx).expect("flat index out of range") = value;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.hidden_dim == other.hidden_dim && self.input_dim == other.input_dim
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(CelError::ShapeMismatch {
                expected_hidden: self.hidden_dim,
                expected_input: self.input_dim,
                hidden: other.hidden_dim,
                input: other.input_dim,
            })
        }
    }

    /// `self += alpha * other`, elementwise.
    pub fn add_scaled(&mut self, other: &Self, alpha: f64) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.iter_mut() {
            *a *= alpha;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// First non-finite entry as `(group, index within group)`.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        self.groups().into_iter().find_map(|(name, group)| {
            group
                .iter()
                .position(|v| !v.is_finite())
                .map(|idx| (name, idx))
        })
    }

    pub(crate) fn ensure_finite_gradient(&self) -> Result<()> {
        match self.first_non_finite() {
            Some((group, index)) => Err(CelError::NonFiniteGradient { group, index }),
            None => Ok(()),
        }
    }

    pub(crate) fn ensure_finite_parameters(&self) -> Result<()> {
        match self.first_non_finite() {
            Some((group, index)) => Err(CelError::NonFiniteParameter { group, index }),
            None => Ok(()),
        }
    }

    /// Writes the binary snapshot format.
    ///
    /// Layout, all integers little-endian:
    ///
    /// ```text
    /// b"CELPARAM"  u32 version=1  u64 H  u64 D  u32 group_count=6
    /// per group:   u32 name_len  name bytes (UTF-8)  u64 len  len × f64 (LE bits)
    /// ```
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.hidden_dim as u64).to_le_bytes())?;
        w.write_all(&(self.input_dim as u64).to_le_bytes())?;
        w.write_all(&(GROUP_NAMES.len() as u32).to_le_bytes())?;
        for (name, group) in self.groups() {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(group.len() as u64).to_le_bytes())?;
            for v in group {
                w.write_all(&v.to_bits().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(CelError::Snapshot("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(CelError::Snapshot(format!("unsupported version {version}")));
        }
        let hidden_dim = read_u64(&mut r)? as usize;
        let input_dim = read_u64(&mut r)? as usize;
        if hidden_dim == 0 || input_dim == 0 {
            return Err(CelError::Snapshot("zero dimension in header".into()));
        }
        let count = read_u32(&mut r)? as usize;
        if count != GROUP_NAMES.len() {
            return Err(CelError::Snapshot(format!("expected 6 groups, found {count}")));
        }
        let mut params = Self::zeros(hidden_dim, input_dim);
        for (expected_name, group) in params.groups_mut() {
            let name_len = read_u32(&mut r)? as usize;
            if name_len > 256 {
                return Err(CelError::Snapshot("group name too long".into()));
            }
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name)?;
            if name != expected_name.as_bytes() {
                return Err(CelError::Snapshot(format!(
                    "expected group `{expected_name}`, found `{}`",
                    String::from_utf8_lossy(&name)
                )));
            }
            let len = read_u64(&mut r)? as usize;
            if len != group.len() {
                return Err(CelError::Snapshot(format!(
                    "group `{expected_name}` has {len} entries, expected {}",
                    group.len()
                )));
            }
            for v in group.iter_mut() {
                *v = f64::from_bits(read_u64(&mut r)?);
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CelError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_snapshot(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CelError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CelError::io(path, e))?;
        Self::read_snapshot(std::io::BufReader::new(file))
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"CELPARAM";
const SNAPSHOT_VERSION: u32 = 1;

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| CelError::Snapshot(format!("truncated: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_inventory_at_32_by_12() {
        let p = ParamTensors::init(32, 12, 7).unwrap();
        let counts: Vec<usize> = p.groups().iter().map(|(_, g)| g.len()).collect();
        assert_eq!(counts, vec![1536, 4096, 128, 128, 32, 1]);
        assert_eq!(p.len(), 5921);
        assert_eq!(p.iter().count(), 5921);
    }

    #[test]
    fn smallest_model_has_18_scalars() {
        let p = ParamTensors::init(1, 1, 0).unwrap();
        assert_eq!(p.iter().count(), 18);
        assert_eq!(parameter_count(1, 1), 18);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ParamTensors::init(5, 3, 11).unwrap();
        let b = ParamTensors::init(5, 3, 11).unwrap();
        let c = ParamTensors::init(5, 3, 12).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
        let bound = 1.0 / 5f64.sqrt();
        assert!(a.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn init_rejects_zero_dims() {
        assert!(ParamTensors::init(0, 3, 1).is_err());
        assert!(ParamTensors::init(3, 0, 1).is_err());
    }

    #[test]
    fn flat_indexing_follows_group_order() {
        let mut p = ParamTensors::zeros(2, 3);
        // weight_ih has 24 entries, weight_hh 16, so index 40 is bias_ih[0].
        p.set_flat(40, 1.5);
        assert_eq!(p.bias_ih[0], 1.5);
        assert_eq!(p.get_flat(40), 1.5);
        p.set_flat(p.len() - 1, -2.0);
        assert_eq!(p.linear_bias[0], -2.0);
    }

    #[test]
    fn snapshot_rejects_garbage() {
        assert!(ParamTensors::read_snapshot(&b"NOTASNAP"[..]).is_err());
        let p = ParamTensors::init(2, 2, 3).unwrap();
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(ParamTensors::read_snapshot(&buf[..]).is_err());
    }
}

use std::ops::Range;

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

/// Layer widths of the encoder/recurrent stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Input feature width.
    pub d_x: usize,
    /// Hidden GCN width.
    pub d_h: usize,
    /// Embedding width, also the GRU state width.
    pub d_z: usize,
}

impl ModelDims {
    pub fn new(d_x: usize, d_h: usize, d_z: usize) -> Result<Self> {
        if d_x == 0 || d_h == 0 || d_z == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dims must be >= 1, got ({d_x}, {d_h}, {d_z})"
            )));
        }
        Ok(Self { d_x, d_h, d_z })
    }

    pub fn enc_len(&self) -> usize {
        self.d_x * self.d_h + self.d_h * self.d_z
    }

    pub fn gate_len(&self) -> usize {
        2 * self.d_z * self.d_z + self.d_z
    }

    pub fn temp_len(&self) -> usize {
        3 * self.gate_len()
    }

    pub fn len(&self) -> usize {
        self.enc_len() + self.temp_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named parameter segments aggregated independently by the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Segment {
    Enc,
    Temp,
    /// Inner-product decoder: reserved, always empty.
    Dec,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Enc, Segment::Temp, Segment::Dec];

    pub fn range(self, dims: &ModelDims) -> Range<usize> {
        let enc = dims.enc_len();
        let total = dims.len();
        match self {
            Segment::Enc => 0..enc,
            Segment::Temp => enc..total,
            Segment::Dec => total..total,
        }
    }
}

/// GRU gate index inside the TEMP segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Update = 0,
    Reset = 1,
    Candidate = 2,
}

/// Offsets of each weight block inside the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub w1: usize,
    pub w2: usize,
    pub temp: usize,
}

impl Offsets {
    pub fn of(dims: &ModelDims) -> Self {
        Self {
            w1: 0,
            w2: dims.d_x * dims.d_h,
            temp: dims.enc_len(),
        }
    }

    /// `(input weights, recurrent weights, bias)` offsets of a gate.
    pub fn gate(&self, dims: &ModelDims, g: Gate) -> (usize, usize, usize) {
        let base = self.temp + g as usize * dims.gate_len();
        let dz2 = dims.d_z * dims.d_z;
        (base, base + dz2, base + 2 * dz2)
    }
}

/// Flat parameter vector with its segment layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub dims: ModelDims,
    pub flat: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn from_flat(dims: ModelDims, flat: Vec<T>) -> Result<Self> {
        if flat.len() != dims.len() {
            return Err(Error::LayoutMismatch {
                expected: dims.len(),
                actual: flat.len(),
            });
        }
        Ok(Self { dims, flat })
    }

    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            flat: vec![T::zero(); dims.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn segment(&self, s: Segment) -> &[T] {
        &self.flat[s.range(&self.dims)]
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|x| x.is_finite())
    }

    pub fn same_layout(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims || self.flat.len() != other.flat.len() {
            return Err(Error::LayoutMismatch {
                expected: self.flat.len(),
                actual: other.flat.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn matrix(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((rows, cols), &self.flat[offset..offset + rows * cols])
            .expect("layout is consistent")
    }

    pub(crate) fn vector(&self, offset: usize, len: usize) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.flat[offset..offset + len])
    }

    pub fn w1(&self) -> ArrayView2<'_, T> {
        self.matrix(0, self.dims.d_x, self.dims.d_h)
    }

    pub fn w2(&self) -> ArrayView2<'_, T> {
        let o = Offsets::of(&self.dims);
        self.matrix(o.w2, self.dims.d_h, self.dims.d_z)
    }

    /// `(W, U, b)` of one GRU gate.
    pub fn gate(&self, g: Gate) -> (ArrayView2<'_, T>, ArrayView2<'_, T>, ArrayView1<'_, T>) {
        let dz = self.dims.d_z;
        let (w, u, b) = Offsets::of(&self.dims).gate(&self.dims, g);
        (self.matrix(w, dz, dz), self.matrix(u, dz, dz), self.vector(b, dz))
    }

    /// Little-endian blob of the flat vector.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.flat.len() * T::BYTES);
        for &x in &self.flat {
            x.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(manifest: &Manifest, bytes: &[u8]) -> Result<Self> {
        if manifest.dtype != T::DTYPE {
            return Err(Error::InvalidArgument(format!(
                "checkpoint holds {} values, expected {}",
                manifest.dtype,
                T::DTYPE
            )));
        }
        if bytes.len() != manifest.len * T::BYTES {
            return Err(Error::LayoutMismatch {
                expected: manifest.len * T::BYTES,
                actual: bytes.len(),
            });
        }
        let flat = bytes.chunks_exact(T::BYTES).map(T::read_le).collect();
        Self::from_flat(manifest.dims, flat)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            dtype: T::DTYPE.to_string(),
            dims: self.dims,
            len: self.flat.len(),
            segments: Segment::ALL
                .iter()
                .map(|&s| {
                    let r = s.range(&self.dims);
                    SegmentEntry {
                        name: s,
                        offset: r.start,
                        len: r.len(),
                    }
                })
                .collect(),
        }
    }
}

/// JSON side-car describing a parameter blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub dims: ModelDims,
    pub len: usize,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub name: Segment,
    pub offset: usize,
    pub len: usize,
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform weights per block, zero biases.
pub fn init_params<T: Scalar>(dims: ModelDims, seed: u64) -> ModelParams<T> {
    let mut rng = seed::rng(seed);
    let mut flat = Vec::with_capacity(dims.len());
    let mut fill = |count: usize, bound: f64, flat: &mut Vec<T>| {
        for _ in 0..count {
            flat.push(T::of(rng.random_range(-bound..=bound)));
        }
    };
    fill(dims.d_x * dims.d_h, glorot_bound(dims.d_x, dims.d_h), &mut flat);
    fill(dims.d_h * dims.d_z, glorot_bound(dims.d_h, dims.d_z), &mut flat);
    let dz = dims.d_z;
    for _ in 0..3 {
        fill(2 * dz * dz, glorot_bound(dz, dz), &mut flat);
        flat.extend(std::iter::repeat_n(T::zero(), dz));
    }
    ModelParams { dims, flat }
}

/// Per-coordinate Glorot bound, matching the layout of [`init_params`].
pub fn glorot_bounds(dims: &ModelDims) -> Vec<f64> {
    let mut out = Vec::with_capacity(dims.len());
    out.extend(std::iter::repeat_n(glorot_bound(dims.d_x, dims.d_h), dims.d_x * dims.d_h));
    out.extend(std::iter::repeat_n(glorot_bound(dims.d_h, dims.d_z), dims.d_h * dims.d_z));
    for _ in 0..3 {
        out.extend(std::iter::repeat_n(
            glorot_bound(dims.d_z, dims.d_z),
            2 * dims.d_z * dims.d_z,
        ));
        out.extend(std::iter::repeat_n(0.0, dims.d_z));
    }
    out
}

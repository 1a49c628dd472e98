//! Dense row-major tensors of ring residues plus their wire serialization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ring::{FixedPointConfig, RingElement};

/// Dense tensor of ring residues. The shape is public metadata.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingTensor {
    shape: Vec<usize>,
    data: Vec<u64>,
}

impl RingTensor {
    pub fn new(shape: Vec<usize>, data: Vec<u64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch { expected: shape, actual: vec![data.len()] });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0; shape.iter().product()] }
    }

    pub fn scalar(v: RingElement) -> Self {
        Self { shape: Vec::new(), data: vec![v.0] }
    }

    pub fn filled(shape: &[usize], v: u64) -> Self {
        Self { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> u64) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: (0..n).map(f).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u64> {
        self.data
    }

    /// Rows and columns of a rank-2 tensor; rank 0/1 tensors are treated as one row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [] => (1, 1),
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => {
                let c = *self.shape.last().unwrap();
                (self.data.len() / c.max(1), c)
            }
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch { expected: shape.to_vec(), actual: self.shape });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), actual: other.shape.clone() });
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(u64) -> u64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn add(&self, other: &Self, cfg: &FixedPointConfig) -> Result<Self> {
        self.zip_map(other, |a, b| cfg.add(a, b))
    }

    pub fn sub(&self, other: &Self, cfg: &FixedPointConfig) -> Result<Self> {
        self.zip_map(other, |a, b| cfg.sub(a, b))
    }

    pub fn mul_elem(&self, other: &Self, cfg: &FixedPointConfig) -> Result<Self> {
        self.zip_map(other, |a, b| cfg.mul(a, b))
    }

    pub fn neg(&self, cfg: &FixedPointConfig) -> Self {
        self.map(|a| cfg.neg(a))
    }

    pub fn scale(&self, k: u64, cfg: &FixedPointConfig) -> Self {
        self.map(|a| cfg.mul(a, k))
    }

    /// Ring matrix product of an `n×k` and a `k×m` tensor.
    pub fn matmul(&self, other: &Self, cfg: &FixedPointConfig) -> Result<Self> {
        let (n, k) = self.dims2();
        let (k2, m) = other.dims2();
        if k != k2 || self.rank() != 2 || other.rank() != 2 {
            return Err(Error::ShapeMismatch { expected: vec![k, m], actual: other.shape.clone() });
        }
        let mut out = vec![0u64; n * m];
        for i in 0..n {
            let row = &self.data[i * k..(i + 1) * k];
            let acc = &mut out[i * m..(i + 1) * m];
            for (p, &a) in row.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let brow = &other.data[p * m..(p + 1) * m];
                for (o, &b) in acc.iter_mut().zip(brow) {
                    *o = o.wrapping_add(a.wrapping_mul(b));
                }
            }
        }
        let mask = cfg.mask();
        out.iter_mut().for_each(|v| *v &= mask);
        Ok(Self { shape: vec![n, m], data: out })
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::ShapeMismatch { expected: vec![0, 0], actual: self.shape.clone() });
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut data = vec![0u64; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self { shape: vec![c, r], data })
    }

    /// Columns `[start, start + width)` of a rank-2 tensor.
    pub fn slice_cols(&self, start: usize, width: usize) -> Result<Self> {
        let (r, c) = self.dims2();
        if start + width > c {
            return Err(Error::OutOfBounds { what: "column slice", index: start + width, limit: c });
        }
        let mut data = Vec::with_capacity(r * width);
        for i in 0..r {
            data.extend_from_slice(&self.data[i * c + start..i * c + start + width]);
        }
        Ok(Self { shape: vec![r, width], data })
    }

    /// Rows `[start, start + count)` of a rank-2 tensor.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Self> {
        let (r, c) = self.dims2();
        if start + count > r {
            return Err(Error::OutOfBounds { what: "row slice", index: start + count, limit: r });
        }
        Ok(Self { shape: vec![count, c], data: self.data[start * c..(start + count) * c].to_vec() })
    }

    /// Horizontal concatenation of rank-2 tensors with equal row counts.
    pub fn concat_cols(parts: &[Self]) -> Result<Self> {
        let rows = parts.first().ok_or(Error::Empty("concat_cols"))?.dims2().0;
        let width: usize = parts.iter().map(|p| p.dims2().1).sum();
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            for p in parts {
                let (pr, pc) = p.dims2();
                if pr != rows {
                    return Err(Error::ShapeMismatch { expected: vec![rows, pc], actual: p.shape.clone() });
                }
                data.extend_from_slice(&p.data[i * pc..(i + 1) * pc]);
            }
        }
        Ok(Self { shape: vec![rows, width], data })
    }

    /// Vertical concatenation of rank-2 tensors with equal column counts.
    pub fn concat_rows(parts: &[Self]) -> Result<Self> {
        let cols = parts.first().ok_or(Error::Empty("concat_rows"))?.dims2().1;
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let (pr, pc) = p.dims2();
            if pc != cols {
                return Err(Error::ShapeMismatch { expected: vec![pr, cols], actual: p.shape.clone() });
            }
            rows += pr;
            data.extend_from_slice(&p.data);
        }
        Ok(Self { shape: vec![rows, cols], data })
    }

    /// Flat concatenation into a rank-1 tensor.
    pub fn concat_flat(parts: &[&Self]) -> Self {
        let data: Vec<u64> = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Self { shape: vec![data.len()], data }
    }

    /// Sum over the last axis of a rank-2 tensor, producing an `r×1` tensor.
    pub fn sum_rows(&self, cfg: &FixedPointConfig) -> Self {
        let (r, c) = self.dims2();
        let data = (0..r)
            .map(|i| self.data[i * c..(i + 1) * c].iter().fold(0u64, |a, &b| a.wrapping_add(b)) & cfg.mask())
            .collect();
        Self { shape: vec![r, 1], data }
    }

    /// Sum over the first axis of a rank-2 tensor, producing a `1×c` tensor.
    pub fn sum_cols(&self, cfg: &FixedPointConfig) -> Self {
        let (r, c) = self.dims2();
        let mut data = vec![0u64; c];
        for i in 0..r {
            for (o, &v) in data.iter_mut().zip(&self.data[i * c..(i + 1) * c]) {
                *o = o.wrapping_add(v);
            }
        }
        data.iter_mut().for_each(|v| *v &= cfg.mask());
        Self { shape: vec![1, c], data }
    }

    /// Repeats an `r×1` column across `c` columns.
    pub fn broadcast_cols(&self, c: usize) -> Self {
        let r = self.data.len();
        let mut data = Vec::with_capacity(r * c);
        for &v in &self.data {
            data.extend(std::iter::repeat_n(v, c));
        }
        Self { shape: vec![r, c], data }
    }

    /// Repeats a `1×c` row across `r` rows.
    pub fn broadcast_rows(&self, r: usize) -> Self {
        let c = self.data.len();
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            data.extend_from_slice(&self.data);
        }
        Self { shape: vec![r, c], data }
    }

    pub fn encode_slice(cfg: &FixedPointConfig, shape: &[usize], values: &[f64]) -> Result<Self> {
        let data = values.iter().map(|&x| cfg.encode(x).map(|e| e.0)).collect::<Result<Vec<_>>>()?;
        Self::new(shape.to_vec(), data)
    }

    pub fn encode_matrix(cfg: &FixedPointConfig, m: &DMatrix<f64>) -> Result<Self> {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(cfg.encode(m[(i, j)])?.0);
            }
        }
        Ok(Self { shape: vec![r, c], data })
    }

    pub fn decode(&self, cfg: &FixedPointConfig) -> Vec<f64> {
        self.data.iter().map(|&v| cfg.decode_raw(v)).collect()
    }

    pub fn decode_matrix(&self, cfg: &FixedPointConfig) -> DMatrix<f64> {
        let (r, c) = self.dims2();
        DMatrix::from_row_iterator(r, c, self.data.iter().map(|&v| cfg.decode_raw(v)))
    }

    /// Shape header: rank as a little-endian `u32`, then each dimension as `u32`.
    pub fn write_header(shape: &[usize], out: &mut Vec<u8>) {
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }

    /// Shape header followed by row-major little-endian 8-byte words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.shape.len() + 8 * self.data.len());
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        Self::write_header(&self.shape, out);
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// Parses one tensor from the front of `bytes`, returning it with the bytes consumed.
    pub fn read_from(bytes: &[u8]) -> Result<(Self, usize)> {
        let word = |at: usize| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::Wire(format!("truncated header at byte {at}")))
        };
        let rank = word(0)? as usize;
        if rank > 8 {
            return Err(Error::Wire(format!("implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for i in 0..rank {
            shape.push(word(4 + 4 * i)? as usize);
        }
        let mut at = 4 + 4 * rank;
        let n: usize = shape.iter().product();
        let body = bytes
            .get(at..at + 8 * n)
            .ok_or_else(|| Error::Wire(format!("payload needs {} bytes, have {}", 8 * n, bytes.len() - at)))?;
        let data = body.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        at += 8 * n;
        Ok((Self { shape, data }, at))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (t, used) = Self::read_from(bytes)?;
        if used != bytes.len() {
            return Err(Error::Wire(format!("{} trailing bytes", bytes.len() - used)));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    #[test]
    fn header_layout() {
        let t = RingTensor::new(vec![2, 1], vec![1, u64::MAX]).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], &2u32.to_le_bytes());
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..20], &1u64.to_le_bytes());
        assert_eq!(b.len(), 28);
    }

    #[test]
    fn malformed_bytes() {
        assert!(RingTensor::from_bytes(&[1, 0, 0]).is_err());
        let mut b = RingTensor::zeros(&[3]).to_bytes();
        b.pop();
        assert!(RingTensor::from_bytes(&b).is_err());
        b.extend_from_slice(&[0, 0]);
        assert!(RingTensor::from_bytes(&b).is_err());
    }

    #[test]
    fn matmul_against_plain() {
        let c = cfg();
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 2, &[2.0, 1.0, 0.0, -1.0, 4.0, 2.0]);
        let ra = RingTensor::encode_matrix(&c, &a).unwrap();
        let rb = RingTensor::encode_matrix(&c, &b).unwrap();
        // product carries 2f fractional bits
        let prod = ra.matmul(&rb, &c).unwrap().map(|v| (c.to_signed(v) >> 16) as u64);
        let expect = &a * &b;
        assert_eq!(prod.decode_matrix(&c), expect);
    }

    #[test]
    fn slicing_and_concat() {
        let t = RingTensor::from_fn(&[3, 4], |i| i as u64);
        let left = t.slice_cols(0, 1).unwrap();
        let right = t.slice_cols(1, 3).unwrap();
        assert_eq!(RingTensor::concat_cols(&[left, right]).unwrap(), t);
        let top = t.slice_rows(0, 2).unwrap();
        let bottom = t.slice_rows(2, 1).unwrap();
        assert_eq!(RingTensor::concat_rows(&[top, bottom]).unwrap(), t);
        assert_eq!(t.transpose().unwrap().transpose().unwrap(), t);
        assert!(t.slice_cols(3, 2).is_err());
    }

    proptest! {
        #[test]
        fn serialization_round_trip(dims in proptest::collection::vec(0usize..5, 0..4), seed in any::<u64>()) {
            let t = RingTensor::from_fn(&dims, |i| seed.wrapping_mul(i as u64 + 1).rotate_left(17));
            prop_assert_eq!(RingTensor::from_bytes(&t.to_bytes()).unwrap(), t);
        }
    }
}

use crate::error::{Error, Result};
use crate::runtime::Phase;
use crate::tensor::RingTensor;

/// Protocol tags carried in the first word of every wire message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Tag {
    Input = 1,
    Output = 2,
    Open = 3,
    BeaverMul = 4,
    BeaverMatmul = 5,
    Cosine = 6,
    BitAnd = 7,
    BitToArith = 8,
    DealerTriple = 16,
    DealerMatTriple = 17,
    DealerCosine = 18,
    DealerBitTriple = 19,
    DealerBitMask = 20,
}

impl Tag {
    const ALL: [Tag; 13] = [
        Tag::Input,
        Tag::Output,
        Tag::Open,
        Tag::BeaverMul,
        Tag::BeaverMatmul,
        Tag::Cosine,
        Tag::BitAnd,
        Tag::BitToArith,
        Tag::DealerTriple,
        Tag::DealerMatTriple,
        Tag::DealerCosine,
        Tag::DealerBitTriple,
        Tag::DealerBitMask,
    ];

    pub fn from_u32(v: u32) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| *t as u32 == v)
    }
}

/// `tag (u32 LE) | phase id (u32 LE) | shape header | payload`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub tag: Tag,
    pub phase: Phase,
    pub tensor: RingTensor,
}

impl WireMessage {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.tensor.rank() + 8 * self.tensor.len());
        out.extend_from_slice(&(self.tag as u32).to_le_bytes());
        out.extend_from_slice(&self.phase.id().to_le_bytes());
        self.tensor.write_to(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Wire("message shorter than its fixed header".into()));
        }
        let tag_id = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let phase_id = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let tag = Tag::from_u32(tag_id).ok_or_else(|| Error::Wire(format!("unknown tag {tag_id}")))?;
        let phase = Phase::from_id(phase_id).ok_or_else(|| Error::Wire(format!("unknown phase {phase_id}")))?;
        let tensor = RingTensor::from_bytes(&bytes[8..])?;
        Ok(Self { tag, phase, tensor })
    }

    /// Payload size counted by the ledger (ring elements only, no headers).
    pub fn payload_bytes(&self) -> u64 {
        8 * self.tensor.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_round_trip() {
        let m = WireMessage {
            tag: Tag::BeaverMul,
            phase: Phase::Forward,
            tensor: RingTensor::new(vec![2], vec![5, 6]).unwrap(),
        };
        let b = m.encode();
        assert_eq!(&b[0..4], &4u32.to_le_bytes());
        assert_eq!(&b[4..8], &Phase::Forward.id().to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(b.len(), 16 + 16);
        assert_eq!(WireMessage::decode(&b).unwrap(), m);
        assert_eq!(m.payload_bytes(), 16);
    }

    #[test]
    fn rejects_unknown_fields() {
        let mut b = WireMessage { tag: Tag::Open, phase: Phase::Input, tensor: RingTensor::zeros(&[]) }.encode();
        b[0] = 99;
        assert!(WireMessage::decode(&b).is_err());
        assert!(WireMessage::decode(&b[..5]).is_err());
    }
}

//! Simulated secure aggregation: fixed-point quantization into Z/2⁶⁴ and
//! pairwise additive masks that cancel in the sum of all shares.
//!
//! Pair seeds come from a deterministic key schedule (SHA-256 over a root
//! secret), standing in for a key agreement between node pairs. Masks are
//! expanded from the seed with ChaCha20 in counter mode.

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_FRAC_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointCodec {
    pub frac_bits: u32,
    /// Symmetric clip bound `B`: inputs are clamped to `[−B, B]`.
    pub clip: f64,
}

/// Encoded vector plus the number of clipped elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub data: Vec<u64>,
    pub clipped: usize,
}

impl FixedPointCodec {
    pub fn new(frac_bits: u32, clip: f64) -> Result<Self> {
        if frac_bits > 52 {
            return Err(Error::Config(format!("too many fractional bits: {frac_bits}")));
        }
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(Error::Config(format!("clip bound must be > 0, got {clip}")));
        }
        Ok(Self { frac_bits, clip })
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// Resolution of one quantization step, `2^-f`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale()
    }

    /// Rejects configurations where the sum of `k` clipped inputs could wrap:
    /// requires `k · B · 2^f < 2^63`.
    pub fn check_capacity(&self, k: usize) -> Result<()> {
        let bound = k as f64 * self.clip * self.scale();
        if bound < 2f64.powi(63) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "fixed-point sum may wrap: K·B·2^f = {bound:e} >= 2^63"
            )))
        }
    }

    pub fn encode(&self, x: &[f64]) -> Encoded {
        let mut clipped = 0;
        let data = x
            .iter()
            .map(|&v| {
                let c = if v > self.clip {
                    clipped += 1;
                    self.clip
                } else if v < -self.clip {
                    clipped += 1;
                    -self.clip
                } else if v.is_nan() {
                    clipped += 1;
                    0.0
                } else {
                    v
                };
                ((c * self.scale()).round() as i64) as u64
            })
            .collect();
        Encoded { data, clipped }
    }

    pub fn decode(&self, v: &[u64]) -> Vec<f64> {
        v.iter().map(|&u| (u as i64) as f64 / self.scale()).collect()
    }
}

pub type PairSeed = [u8; 16];

/// Per-round pair seeds held by one node (or by the whole simulation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseSeeds {
    pub round_id: u64,
    seeds: BTreeMap<(usize, usize), PairSeed>,
}

fn pair_secret(root: &[u8; 32], i: usize, j: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fedsandbox/pair");
    h.update(root);
    h.update((i as u64).to_le_bytes());
    h.update((j as u64).to_le_bytes());
    h.finalize().into()
}

fn round_seed(secret: &[u8; 32], round: u64) -> PairSeed {
    let mut h = Sha256::new();
    h.update(b"fedsandbox/round");
    h.update(secret);
    h.update(round.to_le_bytes());
    let d = h.finalize();
    let mut s = [0u8; 16];
    s.copy_from_slice(&d[..16]);
    s
}

/// Root secret of a simulation, expanded from a 64-bit seed.
pub fn root_secret(seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fedsandbox/root");
    h.update(seed.to_le_bytes());
    h.finalize().into()
}

impl PairwiseSeeds {
    /// Seeds for every pair among `k` nodes.
    pub fn all(root: &[u8; 32], k: usize, round_id: u64) -> Self {
        let mut seeds = BTreeMap::new();
        for i in 0..k {
            for j in i + 1..k {
                seeds.insert((i, j), round_seed(&pair_secret(root, i, j), round_id));
            }
        }
        Self { round_id, seeds }
    }

    /// Seeds of the pairs `node` participates in.
    pub fn for_node(root: &[u8; 32], node: usize, k: usize, round_id: u64) -> Self {
        let seeds = (0..k)
            .filter(|&j| j != node)
            .map(|j| {
                let key = (node.min(j), node.max(j));
                (key, round_seed(&pair_secret(root, key.0, key.1), round_id))
            })
            .collect();
        Self { round_id, seeds }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PairSeed> {
        self.seeds.get(&(i.min(j), i.max(j)))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> Option<PairSeed> {
        self.seeds.remove(&(i.min(j), i.max(j)))
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// Expands a pair seed into `len` words of mask.
pub fn prg_expand(seed: &PairSeed, len: usize) -> Vec<u64> {
    let mut key = [0u8; 32];
    key[..16].copy_from_slice(seed);
    key[16..].copy_from_slice(b"fedsandbox/prg\0\0");
    let mut rng = ChaCha20Rng::from_seed(key);
    (0..len).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedVector {
    pub node_id: usize,
    pub round_id: u64,
    pub payload: Vec<u64>,
}

/// Adds `Σ_{j>i} PRG(s_ij) − Σ_{j<i} PRG(s_ji)` to an encoded vector.
pub fn mask(v: &[u64], node: usize, seeds: &PairwiseSeeds, k: usize) -> Result<MaskedVector> {
    if node >= k {
        return Err(Error::Protocol(format!("node {node} outside federation of {k}")));
    }
    let mut payload = v.to_vec();
    for j in (0..k).filter(|&j| j != node) {
        let seed = seeds.get(node, j).ok_or_else(|| {
            Error::Protocol(format!("missing pair seed ({}, {})", node.min(j), node.max(j)))
        })?;
        let m = prg_expand(seed, v.len());
        if j > node {
            payload.iter_mut().zip(&m).for_each(|(p, r)| *p = p.wrapping_add(*r));
        } else {
            payload.iter_mut().zip(&m).for_each(|(p, r)| *p = p.wrapping_sub(*r));
        }
    }
    Ok(MaskedVector {
        node_id: node,
        round_id: seeds.round_id,
        payload,
    })
}

/// Modular sum of one share per node. Any missing, duplicate or foreign
/// share aborts the round.
pub fn aggregate_modular(shares: &[MaskedVector], k: usize) -> Result<Vec<u64>> {
    let first = shares
        .first()
        .ok_or_else(|| Error::Protocol("no shares received".into()))?;
    let mut seen = BTreeSet::new();
    for s in shares {
        if s.round_id != first.round_id {
            return Err(Error::Protocol(format!(
                "share from node {} belongs to round {}, expected {}",
                s.node_id, s.round_id, first.round_id
            )));
        }
        if s.payload.len() != first.payload.len() {
            return Err(Error::Protocol(format!("share from node {} has wrong length", s.node_id)));
        }
        if s.node_id >= k {
            return Err(Error::Protocol(format!("unknown node {}", s.node_id)));
        }
        if !seen.insert(s.node_id) {
            return Err(Error::Protocol(format!("duplicate share from node {}", s.node_id)));
        }
    }
    if seen.len() != k {
        let missing: Vec<usize> = (0..k).filter(|i| !seen.contains(i)).collect();
        return Err(Error::Protocol(format!("missing shares from nodes {missing:?}")));
    }
    let mut acc = vec![0u64; first.payload.len()];
    for s in shares {
        acc.iter_mut()
            .zip(&s.payload)
            .for_each(|(a, p)| *a = a.wrapping_add(*p));
    }
    Ok(acc)
}

/// Unmasked, decoded sum of all shares.
pub fn aggregate(shares: &[MaskedVector], k: usize, codec: &FixedPointCodec) -> Result<Vec<f64>> {
    Ok(codec.decode(&aggregate_modular(shares, k)?))
}

/// Outcome of one full aggregation round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub sum: Vec<f64>,
    pub clipped: usize,
}

/// Runs one round: every node encodes and masks its vector, the server sums.
pub fn secure_sum(
    inputs: &[Vec<f64>],
    codec: &FixedPointCodec,
    root: &[u8; 32],
    round_id: u64,
) -> Result<RoundOutput> {
    let k = inputs.len();
    codec.check_capacity(k)?;
    let per_node: Vec<Result<(MaskedVector, usize)>> = par::map_indexed(k, |i| {
        let enc = codec.encode(&inputs[i]);
        let seeds = PairwiseSeeds::for_node(root, i, k, round_id);
        Ok((mask(&enc.data, i, &seeds, k)?, enc.clipped))
    });
    let mut shares = Vec::with_capacity(k);
    let mut clipped = 0;
    for r in per_node {
        let (s, c) = r?;
        clipped += c;
        shares.push(s);
    }
    Ok(RoundOutput {
        sum: aggregate(&shares, k, codec)?,
        clipped,
    })
}

/// Sum of the encoded vectors without masking. Masks cancel exactly in
/// modular arithmetic, so this equals the output of [`secure_sum`] bit for bit.
pub fn quantized_sum(inputs: &[Vec<f64>], codec: &FixedPointCodec) -> Result<RoundOutput> {
    let k = inputs.len();
    codec.check_capacity(k)?;
    let dim = inputs.first().map_or(0, Vec::len);
    let mut acc = vec![0u64; dim];
    let mut clipped = 0;
    for v in inputs {
        if v.len() != dim {
            return Err(Error::Protocol(format!("vector length {} != {dim}", v.len())));
        }
        let enc = codec.encode(v);
        clipped += enc.clipped;
        for (a, e) in acc.iter_mut().zip(enc.data) {
            *a = a.wrapping_add(e);
        }
    }
    Ok(RoundOutput {
        sum: codec.decode(&acc),
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn codec() -> FixedPointCodec {
        FixedPointCodec::new(16, 1000.0).unwrap()
    }

    #[test]
    fn zero_and_round_trip() {
        let c = codec();
        assert_eq!(c.encode(&[0.0]).data, vec![0]);
        let mut rng = crate::seed::rng(3);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1000.0..1000.0)).collect();
            let y = c.decode(&c.encode(&x).data);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() <= c.resolution());
            }
        }
    }

    #[test]
    fn clipping_counts() {
        let c = codec();
        let e = c.encode(&[1001.0, -5000.0, 3.0]);
        assert_eq!(e.clipped, 2);
        assert_eq!(c.decode(&e.data), vec![1000.0, -1000.0, 3.0]);
    }

    #[test]
    fn single_node_has_no_mask() {
        let c = codec();
        let v = c.encode(&[1.5, -2.0]).data;
        let seeds = PairwiseSeeds::all(&root_secret(1), 1, 0);
        assert!(seeds.is_empty());
        assert_eq!(mask(&v, 0, &seeds, 1).unwrap().payload, v);
    }

    #[test]
    fn two_nodes_cancel() {
        let c = codec();
        let root = root_secret(5);
        let v1 = c.encode(&[1.0, 2.0, -3.0]).data;
        let v2 = c.encode(&[0.5, -7.0, 4.25]).data;
        let s = PairwiseSeeds::all(&root, 2, 9);
        let m1 = mask(&v1, 0, &s, 2).unwrap();
        let m2 = mask(&v2, 1, &s, 2).unwrap();
        assert_ne!(m1.payload, v1);
        let sum = aggregate_modular(&[m1, m2], 2).unwrap();
        let plain: Vec<u64> = v1.iter().zip(&v2).map(|(a, b)| a.wrapping_add(*b)).collect();
        assert_eq!(sum, plain);
    }

    #[test]
    fn seeds_symmetric_and_round_distinct() {
        let root = root_secret(11);
        let a = PairwiseSeeds::for_node(&root, 2, 5, 3);
        let b = PairwiseSeeds::for_node(&root, 4, 5, 3);
        assert_eq!(a.get(2, 4), b.get(4, 2));
        let c = PairwiseSeeds::for_node(&root, 2, 5, 4);
        assert_ne!(a.get(2, 4), c.get(2, 4));
    }

    #[test]
    fn missing_seed_is_protocol_error() {
        let root = root_secret(1);
        let mut s = PairwiseSeeds::for_node(&root, 0, 3, 0);
        s.remove(0, 2);
        assert!(matches!(mask(&[1, 2], 0, &s, 3), Err(Error::Protocol(_))));
    }

    #[test]
    fn aggregation_precondition_errors() {
        let c = codec();
        let root = root_secret(2);
        let s = PairwiseSeeds::all(&root, 3, 0);
        let shares: Vec<MaskedVector> = (0..3)
            .map(|i| mask(&c.encode(&[i as f64]).data, i, &s, 3).unwrap())
            .collect();
        assert!(aggregate(&shares[..2], 3, &c).is_err());
        let mut dup = shares.clone();
        dup[2] = dup[1].clone();
        assert!(aggregate(&dup, 3, &c).is_err());
        let mut foreign = shares.clone();
        foreign[0].round_id = 7;
        assert!(aggregate(&foreign, 3, &c).is_err());
        assert!(aggregate(&[], 3, &c).is_err());
        assert_eq!(aggregate(&shares, 3, &c).unwrap(), vec![3.0]);
    }

    #[test]
    fn three_party_arithmetic() {
        let c = codec();
        let inputs = vec![vec![1.5; 8], vec![-2.25; 8], vec![0.75; 8]];
        let out = secure_sum(&inputs, &c, &root_secret(0), 0).unwrap();
        for v in out.sum {
            assert!(v.abs() <= 3.0 * c.resolution());
        }
        let zeros = secure_sum(&vec![vec![0.0; 5]; 4], &c, &root_secret(0), 1).unwrap();
        assert_eq!(zeros.sum, vec![0.0; 5]);
    }

    #[test]
    fn capacity_check() {
        let c = FixedPointCodec::new(16, 2f64.powi(42)).unwrap();
        assert!(c.check_capacity(64).is_err());
        assert!(c.check_capacity(1).is_ok());
    }
}

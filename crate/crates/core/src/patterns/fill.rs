use crate::collectives::ExchangeSpec;

/// Element value identifying `sender`: its rank as little-endian bytes,
/// truncated or zero-padded to `elem_size`.
pub fn encode_rank(sender: usize, elem_size: usize) -> Vec<u8> {
    let le = (sender as u64).to_le_bytes();
    (0..elem_size).map(|i| le.get(i).copied().unwrap_or(0)).collect()
}

/// Sets every element this rank sends to `encode_rank(rank)`.
pub fn fill_send(spec: &ExchangeSpec, rank: usize) {
    let value = encode_rank(rank, spec.elem_size);
    let mut send = spec.send.write();
    for p in 0..spec.ranks() {
        for chunk in send[spec.send_range(p)].chunks_exact_mut(spec.elem_size) {
            chunk.copy_from_slice(&value);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub peer: usize,
    /// Element index within the region received from `peer`.
    pub index: usize,
    pub expected: Vec<u8>,
    pub got: Vec<u8>,
}

/// Checks every received element against the sender's encoding.
pub fn validate_recv(spec: &ExchangeSpec) -> Vec<Mismatch> {
    let recv = spec.recv.read();
    let mut out = Vec::new();
    for p in 0..spec.ranks() {
        let expected = encode_rank(p, spec.elem_size);
        for (index, got) in recv[spec.recv_range(p)]
            .chunks_exact(spec.elem_size)
            .enumerate()
        {
            if got != expected.as_slice() {
                out.push(Mismatch {
                    peer: p,
                    index,
                    expected: expected.clone(),
                    got: got.to_vec(),
                });
            }
        }
    }
    out
}

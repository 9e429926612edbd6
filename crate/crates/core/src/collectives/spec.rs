use crate::buffer::SharedBuffer;
use crate::error::{Result, RmaError};

/// One rank's full Alltoallv argument set. Counts and displacements are in
/// elements of `elem_size` bytes.
#[derive(Debug, Clone)]
pub struct ExchangeSpec {
    pub sendcounts: Vec<usize>,
    pub sdispls: Vec<usize>,
    pub recvcounts: Vec<usize>,
    pub rdispls: Vec<usize>,
    pub elem_size: usize,
    pub send: SharedBuffer,
    pub recv: SharedBuffer,
}

impl ExchangeSpec {
    /// Builds a spec with zeroed buffers sized to fit every region.
    pub fn with_buffers(
        sendcounts: Vec<usize>,
        sdispls: Vec<usize>,
        recvcounts: Vec<usize>,
        rdispls: Vec<usize>,
        elem_size: usize,
    ) -> Self {
        let extent = |counts: &[usize], displs: &[usize]| {
            counts
                .iter()
                .zip(displs)
                .map(|(c, d)| c + d)
                .max()
                .unwrap_or(0)
        };
        let send_len = extent(&sendcounts, &sdispls) * elem_size;
        let recv_len = extent(&recvcounts, &rdispls) * elem_size;
        ExchangeSpec {
            sendcounts,
            sdispls,
            recvcounts,
            rdispls,
            elem_size,
            send: SharedBuffer::zeroed(send_len),
            recv: SharedBuffer::zeroed(recv_len),
        }
    }

    /// Copy with freshly allocated buffers holding the same bytes.
    pub fn deep_clone(&self) -> Self {
        ExchangeSpec {
            send: SharedBuffer::from_vec(self.send.to_vec()),
            recv: SharedBuffer::from_vec(self.recv.to_vec()),
            ..self.clone()
        }
    }

    pub fn ranks(&self) -> usize {
        self.sendcounts.len()
    }

    pub fn total_recv_bytes(&self) -> usize {
        self.recvcounts.iter().sum::<usize>() * self.elem_size
    }

    pub fn total_send_bytes(&self) -> usize {
        self.sendcounts.iter().sum::<usize>() * self.elem_size
    }

    /// Byte range of the region received from `peer`.
    pub fn recv_range(&self, peer: usize) -> std::ops::Range<usize> {
        let lo = self.rdispls[peer] * self.elem_size;
        lo..lo + self.recvcounts[peer] * self.elem_size
    }

    /// Byte range of the region sent to `peer`.
    pub fn send_range(&self, peer: usize) -> std::ops::Range<usize> {
        let lo = self.sdispls[peer] * self.elem_size;
        lo..lo + self.sendcounts[peer] * self.elem_size
    }

    /// Checks array lengths, buffer bounds and region disjointness.
    pub fn check(&self, ranks: usize) -> Result<()> {
        if self.elem_size == 0 {
            return Err(RmaError::Argument("element size must be positive".into()));
        }
        for (name, v) in [
            ("sendcounts", &self.sendcounts),
            ("sdispls", &self.sdispls),
            ("recvcounts", &self.recvcounts),
            ("rdispls", &self.rdispls),
        ] {
            if v.len() != ranks {
                return Err(RmaError::Argument(format!(
                    "{name} has {} entries, expected {ranks}",
                    v.len()
                )));
            }
        }
        check_side("send", &self.sendcounts, &self.sdispls, self.elem_size, self.send.len())?;
        check_side("recv", &self.recvcounts, &self.rdispls, self.elem_size, self.recv.len())
    }
}

fn check_side(
    side: &str,
    counts: &[usize],
    displs: &[usize],
    elem_size: usize,
    buffer_len: usize,
) -> Result<()> {
    let mut regions: Vec<(usize, usize, usize)> = Vec::new();
    for (peer, (&c, &d)) in counts.iter().zip(displs).enumerate() {
        if (d + c) * elem_size > buffer_len {
            return Err(RmaError::Argument(format!(
                "{side} region for peer {peer} ends at byte {} beyond buffer of {buffer_len}",
                (d + c) * elem_size
            )));
        }
        if c > 0 {
            regions.push((d, d + c, peer));
        }
    }
    regions.sort_unstable();
    for pair in regions.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(RmaError::Argument(format!(
                "{side} regions of peers {} and {} overlap",
                pair[0].2, pair[1].2
            )));
        }
    }
    Ok(())
}

use crate::collectives::ExchangeSpec;
use crate::error::{Result, RmaError};
use crate::runtime::Rank;

/// Two-sided Alltoallv by pairwise exchange: in round `s` a rank sends to
/// `rank + s` and receives from `rank - s` (mod R). Serves as the oracle for
/// the one-sided variants.
pub fn alltoallv_baseline(rank: &Rank, spec: &ExchangeSpec) -> Result<()> {
    let n = rank.size();
    let me = rank.rank();
    spec.check(n)?;
    for step in 0..n {
        let dest = (me + step) % n;
        let src = (me + n - step) % n;
        let payload = spec.send.read()[spec.send_range(dest)].to_vec();
        rank.send(dest, payload)?;
        let incoming = rank.recv(src)?;
        let range = spec.recv_range(src);
        if incoming.len() != range.len() {
            return Err(RmaError::CountMismatch {
                sender: src,
                receiver: me,
                sent: incoming.len(),
                expected: range.len(),
            });
        }
        spec.recv.write()[range].copy_from_slice(&incoming);
    }
    Ok(())
}

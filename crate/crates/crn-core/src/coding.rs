//! Intra-session random linear network coding over GF(256) and per-channel
//! credit counters.
//!
//! Field arithmetic uses the reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D)
//! with log/antilog tables on generator 2. Batches keep their received
//! coefficient vectors in row-echelon form so innovation checks and rank
//! updates are incremental.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodingError {
    #[error("coefficient count {got} does not match batch size {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("packet belongs to batch {got}, expected {want}")]
    BatchMismatch { got: u64, want: u64 },
    #[error("batch rank {rank} below batch size {size}; cannot decode")]
    RankDeficient { rank: usize, size: usize },
}

pub mod gf256 {
    const POLY: u16 = 0x11D;

    const fn build_exp() -> [u8; 512] {
        let mut exp = [0u8; 512];
        let mut x: u16 = 1;
        let mut i = 0;
        while i < 255 {
            exp[i] = x as u8;
            exp[i + 255] = x as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= POLY;
            }
            i += 1;
        }
        exp
    }

    const fn build_log(exp: &[u8; 512]) -> [u8; 256] {
        let mut log = [0u8; 256];
        let mut i = 0;
        while i < 255 {
            log[exp[i] as usize] = i as u8;
            i += 1;
        }
        log
    }

    const EXP: [u8; 512] = build_exp();
    const LOG: [u8; 256] = build_log(&EXP);

    pub fn add(a: u8, b: u8) -> u8 {
        a ^ b
    }

    pub fn mul(a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            0
        } else {
            EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
        }
    }

    pub fn inv(a: u8) -> u8 {
        assert!(a != 0, "zero has no inverse");
        EXP[255 - LOG[a as usize] as usize]
    }

    pub fn div(a: u8, b: u8) -> u8 {
        mul(a, inv(b))
    }

    /// dst += c * src, elementwise.
    pub fn mul_add_row(dst: &mut [u8], src: &[u8], c: u8) {
        for (d, &s) in dst.iter_mut().zip(src) {
            *d ^= mul(c, s);
        }
    }

    pub fn scale_row(row: &mut [u8], c: u8) {
        for v in row.iter_mut() {
            *v = mul(*v, c);
        }
    }
}

/// A coded packet: coefficient vector over the batch plus the combined
/// payload. `alpha` is the forwarding probability attached by the sender for
/// the receiving candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedPacket {
    pub batch_id: u64,
    pub coeffs: Vec<u8>,
    pub payload: Vec<u8>,
    pub alpha: f64,
}

impl CodedPacket {
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

/// Encodes one combination of the native packets of a batch.
pub fn encode(
    batch_id: u64,
    natives: &[Vec<u8>],
    coeffs: &[u8],
) -> Result<CodedPacket, CodingError> {
    if coeffs.len() != natives.len() {
        return Err(CodingError::LengthMismatch {
            got: coeffs.len(),
            want: natives.len(),
        });
    }
    let payload_len = natives.first().map_or(0, Vec::len);
    for n in natives {
        if n.len() != payload_len {
            return Err(CodingError::LengthMismatch {
                got: n.len(),
                want: payload_len,
            });
        }
    }
    let mut payload = vec![0u8; payload_len];
    for (c, native) in coeffs.iter().zip(natives) {
        gf256::mul_add_row(&mut payload, native, *c);
    }
    Ok(CodedPacket {
        batch_id,
        coeffs: coeffs.to_vec(),
        payload,
        alpha: 1.0,
    })
}

/// Received state of one batch at one node.
#[derive(Debug, Clone)]
pub struct CodedBatch {
    pub batch_id: u64,
    pub batch_size: usize,
    pub payload_len: usize,
    /// Row-echelon coefficient rows; pivot[c] names the row whose leading
    /// column is c.
    pub coefficient_matrix: Vec<Vec<u8>>,
    pub payloads: Vec<Vec<u8>>,
    pivot: Vec<Option<usize>>,
}

impl CodedBatch {
    pub fn new(batch_id: u64, batch_size: usize, payload_len: usize) -> Self {
        CodedBatch {
            batch_id,
            batch_size,
            payload_len,
            coefficient_matrix: Vec::new(),
            payloads: Vec::new(),
            pivot: vec![None; batch_size],
        }
    }

    pub fn rank(&self) -> usize {
        self.coefficient_matrix.len()
    }

    pub fn decodable(&self) -> bool {
        self.rank() == self.batch_size
    }

    /// Reduces `pkt` against the stored rows; stores it and returns true iff
    /// it is innovative (rank increases).
    pub fn store_and_rank(&mut self, pkt: &CodedPacket) -> Result<bool, CodingError> {
        if pkt.batch_id != self.batch_id {
            return Err(CodingError::BatchMismatch {
                got: pkt.batch_id,
                want: self.batch_id,
            });
        }
        if pkt.coeffs.len() != self.batch_size {
            return Err(CodingError::LengthMismatch {
                got: pkt.coeffs.len(),
                want: self.batch_size,
            });
        }
        let mut coeffs = pkt.coeffs.clone();
        let mut payload = pkt.payload.clone();
        for col in 0..self.batch_size {
            if coeffs[col] == 0 {
                continue;
            }
            match self.pivot[col] {
                Some(row) => {
                    let factor = coeffs[col];
                    let (pc, pp) = (&self.coefficient_matrix[row], &self.payloads[row]);
                    // coeffs -= factor * pivot_row (pivot rows are normalized)
                    let pc = pc.clone();
                    let pp = pp.clone();
                    gf256::mul_add_row(&mut coeffs, &pc, factor);
                    gf256::mul_add_row(&mut payload, &pp, factor);
                }
                None => {
                    let inv = gf256::inv(coeffs[col]);
                    gf256::scale_row(&mut coeffs, inv);
                    gf256::scale_row(&mut payload, inv);
                    self.pivot[col] = Some(self.coefficient_matrix.len());
                    self.coefficient_matrix.push(coeffs);
                    self.payloads.push(payload);
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// True iff `other`'s rowspace is contained in this batch's rowspace:
    /// no recombination the other node can send would be innovative here.
    pub fn contains(&self, other: &CodedBatch) -> bool {
        if self.decodable() {
            return true;
        }
        for row in &other.coefficient_matrix {
            let mut r = row.clone();
            for col in 0..self.batch_size {
                if r[col] == 0 {
                    continue;
                }
                match self.pivot[col] {
                    Some(idx) => {
                        let factor = r[col];
                        let pc = self.coefficient_matrix[idx].clone();
                        gf256::mul_add_row(&mut r, &pc, factor);
                    }
                    None => return false,
                }
            }
        }
        true
    }

    /// Random recombination of the stored rows; requires rank >= 1.
    pub fn recode<R: Rng>(&self, rng: &mut R) -> CodedPacket {
        assert!(self.rank() > 0, "cannot recode an empty batch");
        let mut coeffs = vec![0u8; self.batch_size];
        let mut payload = vec![0u8; self.payload_len];
        let mut any = false;
        for (row_c, row_p) in self.coefficient_matrix.iter().zip(&self.payloads) {
            let c: u8 = rng.gen();
            if c != 0 {
                any = true;
            }
            gf256::mul_add_row(&mut coeffs, row_c, c);
            gf256::mul_add_row(&mut payload, row_p, c);
        }
        if !any {
            // All-zero draw would waste the transmission; fall back to the
            // first stored row.
            coeffs.copy_from_slice(&self.coefficient_matrix[0]);
            payload.copy_from_slice(&self.payloads[0]);
        }
        CodedPacket {
            batch_id: self.batch_id,
            coeffs,
            payload,
            alpha: 1.0,
        }
    }

    /// Gaussian elimination to identity; returns the native payloads in
    /// order. Requires full rank.
    pub fn decode(&self) -> Result<Vec<Vec<u8>>, CodingError> {
        if !self.decodable() {
            return Err(CodingError::RankDeficient {
                rank: self.rank(),
                size: self.batch_size,
            });
        }
        let n = self.batch_size;
        // Reorder so row i carries pivot column i (leading 1 at column i,
        // zeros to its left), then clear everything above each pivot.
        let mut coeffs: Vec<Vec<u8>> = (0..n)
            .map(|c| self.coefficient_matrix[self.pivot[c].unwrap()].clone())
            .collect();
        let mut payloads: Vec<Vec<u8>> = (0..n)
            .map(|c| self.payloads[self.pivot[c].unwrap()].clone())
            .collect();
        for col in (0..n).rev() {
            for row in 0..col {
                let f = coeffs[row][col];
                if f != 0 {
                    let pc = coeffs[col].clone();
                    let pp = payloads[col].clone();
                    gf256::mul_add_row(&mut coeffs[row], &pc, f);
                    gf256::mul_add_row(&mut payloads[row], &pp, f);
                }
            }
        }
        Ok(payloads)
    }
}

/// Coefficient-space row basis without payloads, for coverage queries over
/// many nodes' stored batches (rank bookkeeping only, no decoding).
#[derive(Debug, Clone)]
pub struct RowBasis {
    batch_size: usize,
    rows: Vec<Vec<u8>>,
    pivot: Vec<Option<usize>>,
}

impl RowBasis {
    pub fn new(batch_size: usize) -> Self {
        RowBasis {
            batch_size,
            rows: Vec::new(),
            pivot: vec![None; batch_size],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `row` against the basis; if a nonzero remainder survives it
    /// joins the basis and the call returns true (the row was novel).
    pub fn absorb(&mut self, row: &[u8]) -> bool {
        debug_assert_eq!(row.len(), self.batch_size);
        let mut r = row.to_vec();
        for col in 0..self.batch_size {
            if r[col] == 0 {
                continue;
            }
            match self.pivot[col] {
                Some(idx) => {
                    let factor = r[col];
                    let p = self.rows[idx].clone();
                    gf256::mul_add_row(&mut r, &p, factor);
                }
                None => {
                    let inv = gf256::inv(r[col]);
                    for v in r.iter_mut() {
                        *v = gf256::mul(*v, inv);
                    }
                    self.pivot[col] = Some(self.rows.len());
                    self.rows.push(r);
                    return true;
                }
            }
        }
        false
    }
}

/// Eq. (11): credit contribution for one window. Returns sent / expected
/// received; zero when the node received nothing in the window.
pub fn credit_update(sent: f64, expected_received: f64) -> f64 {
    assert!(sent >= 0.0 && expected_received >= 0.0);
    if expected_received == 0.0 {
        0.0
    } else {
        sent / expected_received
    }
}

/// credit[node][k] counters, mutated only by window accumulation and the
/// post-broadcast decrement.
#[derive(Debug, Clone)]
pub struct CreditLedger {
    pub credit: Vec<Vec<f64>>,
}

impl CreditLedger {
    pub fn new(num_nodes: usize, num_channels: usize) -> Self {
        CreditLedger {
            credit: vec![vec![0.0; num_channels]; num_nodes],
        }
    }

    pub fn accumulate(&mut self, node: usize, k: usize, amount: f64) {
        self.credit[node][k] += amount;
    }

    pub fn positive(&self, node: usize, k: usize) -> bool {
        self.credit[node][k] > 0.0
    }

    /// Post-broadcast decrement by one.
    pub fn spend(&mut self, node: usize, k: usize) {
        self.credit[node][k] -= 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_axioms_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (a, b, c): (u8, u8, u8) = (rng.gen(), rng.gen(), rng.gen());
            assert_eq!(
                gf256::mul(a, gf256::add(b, c)),
                gf256::add(gf256::mul(a, b), gf256::mul(a, c))
            );
            assert_eq!(gf256::mul(a, b), gf256::mul(b, a));
        }
        for a in 1..=255u8 {
            assert_eq!(gf256::mul(a, gf256::inv(a)), 1);
        }
    }

    fn random_natives(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Vec<u8>> {
        (0..n).map(|_| (0..len).map(|_| rng.gen()).collect()).collect()
    }

    #[test]
    fn unit_vector_encodes_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let natives = random_natives(&mut rng, 4, 16);
        let mut coeffs = vec![0u8; 4];
        coeffs[2] = 1;
        let pkt = encode(0, &natives, &coeffs).unwrap();
        assert_eq!(pkt.payload, natives[2]);
    }

    #[test]
    fn zero_coeffs_give_zero_noninnovative_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let natives = random_natives(&mut rng, 4, 16);
        let pkt = encode(0, &natives, &[0, 0, 0, 0]).unwrap();
        assert!(pkt.is_zero());
        assert!(pkt.payload.iter().all(|&b| b == 0));
        let mut batch = CodedBatch::new(0, 4, 16);
        assert!(!batch.store_and_rank(&pkt).unwrap());
        assert_eq!(batch.rank(), 0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let natives = vec![vec![1u8; 8], vec![2u8; 8]];
        assert!(matches!(
            encode(0, &natives, &[1]),
            Err(CodingError::LengthMismatch { got: 1, want: 2 })
        ));
        let uneven = vec![vec![1u8; 8], vec![2u8; 9]];
        assert!(encode(0, &uneven, &[1, 1]).is_err());
    }

    #[test]
    fn batch_mismatch_rejected() {
        let mut batch = CodedBatch::new(7, 2, 4);
        let pkt = CodedPacket {
            batch_id: 8,
            coeffs: vec![1, 0],
            payload: vec![0; 4],
            alpha: 1.0,
        };
        assert!(matches!(
            batch.store_and_rank(&pkt),
            Err(CodingError::BatchMismatch { got: 8, want: 7 })
        ));
    }

    #[test]
    fn duplicate_is_not_innovative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let natives = random_natives(&mut rng, 3, 8);
        let pkt = encode(0, &natives, &[1, 2, 3]).unwrap();
        let mut batch = CodedBatch::new(0, 3, 8);
        assert!(batch.store_and_rank(&pkt).unwrap());
        assert!(!batch.store_and_rank(&pkt).unwrap());
        assert_eq!(batch.rank(), 1);
        // A scalar multiple is dependent too.
        let mut scaled = pkt.clone();
        gf256::scale_row(&mut scaled.coeffs, 5);
        gf256::scale_row(&mut scaled.payload, 5);
        assert!(!batch.store_and_rank(&scaled).unwrap());
    }

    #[test]
    fn independent_vectors_raise_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let natives = random_natives(&mut rng, 4, 8);
        let mut batch = CodedBatch::new(0, 4, 8);
        for k in 0..4 {
            let mut coeffs = vec![0u8; 4];
            coeffs[k] = 1;
            let pkt = encode(0, &natives, &coeffs).unwrap();
            assert!(batch.store_and_rank(&pkt).unwrap());
            assert_eq!(batch.rank(), k + 1);
        }
    }

    #[test]
    fn identity_matrix_decodes_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let natives = random_natives(&mut rng, 5, 12);
        let mut batch = CodedBatch::new(0, 5, 12);
        for k in 0..5 {
            let mut coeffs = vec![0u8; 5];
            coeffs[k] = 1;
            batch.store_and_rank(&encode(0, &natives, &coeffs).unwrap()).unwrap();
        }
        assert_eq!(batch.decode().unwrap(), natives);
    }

    #[test]
    fn rank_deficient_decode_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let natives = random_natives(&mut rng, 10, 8);
        let mut batch = CodedBatch::new(0, 10, 8);
        for k in 0..9 {
            let mut coeffs = vec![0u8; 10];
            coeffs[k] = 1;
            batch.store_and_rank(&encode(0, &natives, &coeffs).unwrap()).unwrap();
        }
        assert!(matches!(
            batch.decode(),
            Err(CodingError::RankDeficient { rank: 9, size: 10 })
        ));
    }

    #[test]
    fn random_full_rank_frequency() {
        // 10 uniform random vectors over GF(256)^10 are full rank with
        // probability prod_{j=1..10} (1 - 256^-j) > 0.996.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut full = 0;
        for _ in 0..1000 {
            let mut batch = CodedBatch::new(0, 10, 1);
            for _ in 0..10 {
                let coeffs: Vec<u8> = (0..10).map(|_| rng.gen()).collect();
                let pkt = CodedPacket {
                    batch_id: 0,
                    coeffs,
                    payload: vec![0],
                    alpha: 1.0,
                };
                batch.store_and_rank(&pkt).unwrap();
            }
            if batch.decodable() {
                full += 1;
            }
        }
        assert!(full >= 950, "full-rank count {full}");
    }

    #[test]
    fn recode_stays_in_row_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let natives = random_natives(&mut rng, 4, 8);
        let mut batch = CodedBatch::new(0, 4, 8);
        for _ in 0..2 {
            let coeffs: Vec<u8> = (0..4).map(|_| rng.gen()).collect();
            batch.store_and_rank(&encode(0, &natives, &coeffs).unwrap()).unwrap();
        }
        let rank_before = batch.rank();
        let mut sink = batch.clone();
        for _ in 0..20 {
            let pkt = batch.recode(&mut rng);
            sink.store_and_rank(&pkt).unwrap();
        }
        // Recoded packets never add information beyond the source rows.
        assert_eq!(sink.rank(), rank_before);
    }

    #[test]
    fn credit_update_values() {
        assert_eq!(credit_update(4.0, 8.0), 0.5);
        assert_eq!(credit_update(0.0, 5.0), 0.0);
        assert_eq!(credit_update(3.0, 0.0), 0.0);
        // Halving the expected receptions doubles the credit.
        assert_eq!(credit_update(4.0, 4.0), 2.0 * credit_update(4.0, 8.0));
    }

    #[test]
    fn credit_ledger_spend_cycle() {
        let mut ledger = CreditLedger::new(3, 2);
        assert!(!ledger.positive(1, 0));
        ledger.accumulate(1, 0, 1.5);
        assert!(ledger.positive(1, 0));
        ledger.spend(1, 0);
        assert!(ledger.positive(1, 0));
        ledger.spend(1, 0);
        assert!(!ledger.positive(1, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn decode_inverts_encode(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let size = rng.gen_range(1..=10);
            let natives = random_natives(&mut rng, size, 32);
            let mut batch = CodedBatch::new(seed, size, 32);
            // Feed random combinations until full rank (innovative w.h.p.).
            let mut guard = 0;
            while !batch.decodable() {
                let coeffs: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
                batch.store_and_rank(&encode(seed, &natives, &coeffs).unwrap()).unwrap();
                guard += 1;
                prop_assert!(guard < 200);
            }
            prop_assert_eq!(batch.decode().unwrap(), natives);
        }
    }
}

//! Global context extraction.
//!
//! Every training user's full history contributes directed 1-, 2- and 3-hop
//! item pairs whose time gap is within `L_time`. Each occurrence is weighted
//! by `a·(L_time − Δt)/L_time + b`, the weights are summed per pair and hop,
//! symmetrized, combined as `A' = I + α·A¹ + β·A² + γ·A³`, normalized as
//! `D^{-1/2} A' D^{-1/2}` and applied once to the item embedding table.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, IoContext, Result};
use crate::ingest::UserSequence;
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;
use crate::tensor::Mat;

pub const MAX_HOP: usize = 3;

/// Which parts of the co-occurrence weighting are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AblationVariant {
    /// Interval weights, occurrence counts and the `L_time` threshold.
    #[default]
    Full,
    /// No interval weighting (`a = 0, b = 1`): weights are plain counts.
    NoI,
    /// Neither intervals nor counts: any qualifying pair weighs 1.
    NoIN,
    /// Like `NoIN`, and the `L_time` threshold is also dropped.
    NoINT,
}

impl AblationVariant {
    pub const ALL: [Self; 4] = [Self::Full, Self::NoI, Self::NoIN, Self::NoINT];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoI => "no_I",
            Self::NoIN => "no_IN",
            Self::NoINT => "no_INT",
        }
    }

    pub fn uses_intervals(self) -> bool {
        self == Self::Full
    }

    pub fn uses_counts(self) -> bool {
        matches!(self, Self::Full | Self::NoI)
    }

    pub fn uses_threshold(self) -> bool {
        self != Self::NoINT
    }
}

impl FromStr for AblationVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "no_I" | "-I" => Ok(Self::NoI),
            "no_IN" | "-IN" => Ok(Self::NoIN),
            "no_INT" | "-INT" => Ok(Self::NoINT),
            other => Err(format!("unknown variant `{other}` (full|no_I|no_IN|no_INT)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GceConfig {
    pub a: f64,
    pub b: f64,
    /// Threshold in time units.
    pub l_time: f64,
    pub time_unit_seconds: i64,
    pub variant: AblationVariant,
    pub allow_self_pairs: bool,
}

impl GceConfig {
    pub fn from_hyper(hp: &crate::config::HyperParams) -> Self {
        Self {
            a: hp.a,
            b: hp.b,
            l_time: hp.l_time as f64,
            time_unit_seconds: hp.time_unit_seconds,
            variant: hp.variant,
            allow_self_pairs: hp.allow_self_pairs,
        }
    }

    /// The `(a, b)` pair actually used by the variant.
    pub fn effective_ab(&self) -> (f64, f64) {
        if self.variant.uses_intervals() {
            (self.a, self.b)
        } else {
            (0.0, 1.0)
        }
    }

    pub fn to_units(&self, seconds: i64) -> f64 {
        seconds as f64 / self.time_unit_seconds as f64
    }
}

/// Weight of one pair occurrence with gap `delta_t` (time units).
///
/// Panics if `delta_t` lies outside `[0, l_time]`; callers filter first.
pub fn occurrence_weight(delta_t: f64, a: f64, b: f64, l_time: f64) -> f64 {
    assert!(
        (0.0..=l_time).contains(&delta_t),
        "interval {delta_t} outside [0, {l_time}]"
    );
    a * ((l_time - delta_t) / l_time) + b
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairStat {
    pub count: u64,
    /// Σ of occurrence weights (`q` before the variant's count switch).
    pub weight: f64,
}

/// Accumulated directed pair statistics for hops 1..=3.
#[derive(Clone, Debug, PartialEq)]
pub struct HopPairAccumulator {
    hops: [BTreeMap<(usize, usize), PairStat>; MAX_HOP],
    config: GceConfig,
}

impl HopPairAccumulator {
    pub fn new(config: GceConfig) -> Self {
        Self {
            hops: Default::default(),
            config,
        }
    }

    pub fn config(&self) -> &GceConfig {
        &self.config
    }

    /// Directed pair statistics for hop `k` (1-based).
    pub fn pairs(&self, k: usize) -> &BTreeMap<(usize, usize), PairStat> {
        &self.hops[k - 1]
    }

    /// Effective accumulated weight `q^k_{μυ}` under the configured variant.
    pub fn q(&self, k: usize, from: usize, to: usize) -> f64 {
        self.pairs(k)
            .get(&(from, to))
            .map_or(0.0, |s| self.effective(s))
    }

    fn effective(&self, s: &PairStat) -> f64 {
        if self.config.variant.uses_counts() {
            s.weight
        } else if s.count > 0 {
            1.0
        } else {
            0.0
        }
    }

    /// Total pair occurrences over all hops.
    pub fn total_occurrences(&self) -> u64 {
        self.hops.iter().flat_map(|m| m.values()).map(|s| s.count).sum()
    }

    pub fn max_item(&self) -> Option<usize> {
        self.hops
            .iter()
            .flat_map(|m| m.keys())
            .map(|&(a, b)| a.max(b))
            .max()
    }

    fn add(&mut self, k: usize, from: usize, to: usize, w: f64) {
        let stat = self.hops[k - 1].entry((from, to)).or_default();
        stat.count += 1;
        stat.weight += w;
    }
}

/// Collects every qualifying k-hop pair from `sequences`, in user order.
pub fn extract_hop_pairs<'a, I>(sequences: I, config: &GceConfig) -> HopPairAccumulator
where
    I: IntoIterator<Item = &'a UserSequence>,
{
    let (a, b) = config.effective_ab();
    let mut acc = HopPairAccumulator::new(config.clone());
    for seq in sequences {
        let n = seq.len();
        for start in 0..n {
            for k in 1..=MAX_HOP {
                let end = start + k;
                if end >= n {
                    break;
                }
                let (from, to) = (seq.items[start], seq.items[end]);
                if from == to && !config.allow_self_pairs {
                    continue;
                }
                let dt = config.to_units(seq.timestamps[end] - seq.timestamps[start]);
                let within = dt <= config.l_time;
                if config.variant.uses_threshold() && !within {
                    continue;
                }
                let w = if within {
                    occurrence_weight(dt, a, b, config.l_time)
                } else {
                    // only reachable without the threshold, where counts are ignored
                    1.0
                };
                acc.add(k, from, to, w);
            }
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency<T> {
    pub a_prime: CsrMatrix<T>,
    pub degree: Vec<T>,
    pub a_norm: CsrMatrix<T>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn num_items(&self) -> usize {
        self.a_norm.n_rows()
    }

    /// Global context embeddings `A · E_item`.
    pub fn global_embeddings(&self, item_table: &Mat<T>) -> Mat<T> {
        global_embeddings(&self.a_norm, item_table)
    }
}

/// Builds `A'`, its degrees and the symmetric normalization.
pub fn build_weighted_adjacency<T: Scalar>(
    acc: &HopPairAccumulator,
    alpha: f64,
    beta: f64,
    gamma: f64,
    num_items: usize,
) -> NormalizedAdjacency<T> {
    if let Some(max) = acc.max_item() {
        assert!(max < num_items, "item index {max} exceeds num_items {num_items}");
    }
    let hop_w = [alpha, beta, gamma];
    // canonical (lo, hi) -> symmetrized A^k values
    let mut sym: BTreeMap<(usize, usize), [f64; MAX_HOP]> = BTreeMap::new();
    for k in 1..=MAX_HOP {
        for &(from, to) in acc.pairs(k).keys() {
            let key = (from.min(to), from.max(to));
            let slot = sym.entry(key).or_default();
            slot[k - 1] = acc.q(k, key.0, key.1) + acc.q(k, key.1, key.0);
        }
    }

    let combine = |a: &[f64; MAX_HOP]| -> T {
        let mut v = T::zero();
        for (w, x) in hop_w.iter().zip(a) {
            v += T::of(*w) * T::of(*x);
        }
        v
    };
    let mut diag = vec![T::one(); num_items];
    let mut triplets = Vec::with_capacity(num_items + 2 * sym.len());
    for (&(lo, hi), a) in &sym {
        let v = combine(a);
        if lo == hi {
            diag[lo] += v;
        } else if v != T::zero() {
            triplets.push((lo, hi, v));
            triplets.push((hi, lo, v));
        }
    }
    triplets.extend(diag.iter().enumerate().map(|(i, &v)| (i, i, v)));
    let a_prime = CsrMatrix::from_triplets(num_items, num_items, &triplets);

    let degree = a_prime.row_sums();
    assert!(
        degree.iter().all(|&d| d > T::zero()),
        "adjacency has a row with zero degree"
    );
    let inv_sqrt: Vec<T> = degree.iter().map(|d| d.sqrt().recip()).collect();
    let a_norm = a_prime.map_values(|r, c, v| v * (inv_sqrt[r] * inv_sqrt[c]));
    NormalizedAdjacency {
        a_prime,
        degree,
        a_norm,
        alpha,
        beta,
        gamma,
    }
}

/// `E_global = A · E_item`: one sparse-dense product, nothing else.
pub fn global_embeddings<T: Scalar>(a_norm: &CsrMatrix<T>, item_table: &Mat<T>) -> Mat<T> {
    a_norm.mul_dense(item_table)
}

/// Convenience: extract pairs from `sequences` and build the adjacency.
pub fn build_from_sequences<'a, T: Scalar, I>(
    sequences: I,
    hp: &crate::config::HyperParams,
    num_items: usize,
) -> (HopPairAccumulator, NormalizedAdjacency<T>)
where
    I: IntoIterator<Item = &'a UserSequence>,
{
    let acc = extract_hop_pairs(sequences, &GceConfig::from_hyper(hp));
    let adj = build_weighted_adjacency(&acc, hp.alpha, hp.beta, hp.gamma, num_items);
    (acc, adj)
}

pub const ADJACENCY_MAGIC: &[u8; 9] = b"GIMI-ADJ1";

/// Writes a CSR matrix: magic `GIMI-ADJ1`, i64 rows, i64 cols, i64 nnz,
/// i64 indptr[rows + 1], i64 indices[nnz], f64 values[nnz], all little-endian.
pub fn write_adjacency<T: Scalar>(path: &Path, m: &CsrMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_path(path)?);
    let mut buf = Vec::with_capacity(32 + 8 * (m.n_rows() + 1 + 2 * m.nnz()));
    buf.extend_from_slice(ADJACENCY_MAGIC);
    for v in [m.n_rows(), m.n_cols(), m.nnz()] {
        buf.extend_from_slice(&(v as i64).to_le_bytes());
    }
    for &p in m.indptr() {
        buf.extend_from_slice(&(p as i64).to_le_bytes());
    }
    for &c in m.indices() {
        buf.extend_from_slice(&(c as i64).to_le_bytes());
    }
    for v in m.values() {
        buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
    }
    w.write_all(&buf).and_then(|_| w.flush()).with_path(path)
}

pub fn read_adjacency(path: &Path) -> Result<CsrMatrix<f64>> {
    let bytes = fs::read(path).with_path(path)?;
    let bad = |reason: &str| Error::Format {
        what: "adjacency",
        reason: reason.to_owned(),
    };
    if bytes.len() < 33 || &bytes[..9] != ADJACENCY_MAGIC {
        return Err(bad("bad magic or truncated header"));
    }
    let mut words = bytes[9..]
        .chunks_exact(8)
        .map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
    let mut next_i64 = || words.next().map(i64::from_le_bytes).ok_or_else(|| bad("truncated"));
    let rows = usize::try_from(next_i64()?).map_err(|_| bad("negative dims"))?;
    let cols = usize::try_from(next_i64()?).map_err(|_| bad("negative dims"))?;
    let nnz = usize::try_from(next_i64()?).map_err(|_| bad("negative nnz"))?;
    let to_usize = |v: i64| usize::try_from(v).map_err(|_| bad("negative index"));
    let indptr = (0..=rows).map(|_| next_i64().and_then(to_usize)).collect::<Result<Vec<_>>>()?;
    let indices = (0..nnz).map(|_| next_i64().and_then(to_usize)).collect::<Result<Vec<_>>>()?;
    let values = (0..nnz)
        .map(|_| next_i64().map(|v| f64::from_bits(v as u64)))
        .collect::<Result<Vec<_>>>()?;
    CsrMatrix::from_raw(rows, cols, indptr, indices, values).ok_or_else(|| bad("inconsistent CSR arrays"))
}

/// Row-major `f32` dump of an embedding table, no header.
pub fn write_embeddings_f32<T: Scalar>(path: &Path, m: &Mat<T>) -> Result<()> {
    let mut buf = Vec::with_capacity(4 * m.as_slice().len());
    for v in m.as_slice() {
        buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    fs::write(path, buf).with_path(path)
}

pub fn read_embeddings_f32(path: &Path, cols: usize) -> Result<Mat<f32>> {
    let bytes = fs::read(path).with_path(path)?;
    if cols == 0 || bytes.len() % (4 * cols) != 0 {
        return Err(Error::Format {
            what: "embeddings",
            reason: format!("{} bytes is not a multiple of {} columns", bytes.len(), cols),
        });
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect();
    Ok(Mat::from_vec(data.len() / cols, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(variant: AblationVariant) -> GceConfig {
        GceConfig {
            a: 0.65,
            b: 0.35,
            l_time: 64.0,
            time_unit_seconds: 1,
            variant,
            allow_self_pairs: true,
        }
    }

    fn seq(user: usize, items: &[usize], ts: &[i64]) -> UserSequence {
        UserSequence {
            user,
            items: items.to_vec(),
            timestamps: ts.to_vec(),
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(occurrence_weight(0.0, 0.3, 0.7, 10.0), 1.0);
        assert_eq!(occurrence_weight(10.0, 0.3, 0.7, 10.0), 0.7);
        assert_eq!(occurrence_weight(32.0, 0.5, 0.5, 64.0), 0.75);
    }

    #[test]
    #[should_panic]
    fn weight_beyond_threshold_is_contract_violation() {
        occurrence_weight(65.0, 0.5, 0.5, 64.0);
    }

    #[test]
    fn user_b_hop_pairs() {
        // i2, i5, i1, i4 with all gaps inside the threshold
        let s = seq(0, &[2, 5, 1, 4], &[1, 2, 3, 4]);
        let acc = extract_hop_pairs([&s], &cfg(AblationVariant::Full));
        let keys = |k| acc.pairs(k).keys().copied().collect::<Vec<_>>();
        assert_eq!(keys(1), vec![(1, 4), (2, 5), (5, 1)]);
        assert_eq!(keys(2), vec![(2, 1), (5, 4)]);
        assert_eq!(keys(3), vec![(2, 4)]);
    }

    #[test]
    fn single_item_has_no_pairs() {
        let s = seq(0, &[3], &[1]);
        let acc = extract_hop_pairs([&s], &cfg(AblationVariant::Full));
        assert_eq!(acc.total_occurrences(), 0);
    }

    #[test]
    fn threshold_filters_and_no_int_keeps() {
        let s = seq(0, &[1, 2], &[0, 100]);
        assert_eq!(extract_hop_pairs([&s], &cfg(AblationVariant::Full)).total_occurrences(), 0);
        let acc = extract_hop_pairs([&s], &cfg(AblationVariant::NoINT));
        assert_eq!(acc.q(1, 1, 2), 1.0);
    }

    #[test]
    fn zero_gap_pairs_kept_and_self_pairs_flag() {
        let s = seq(0, &[1, 1], &[5, 5]);
        let acc = extract_hop_pairs([&s], &cfg(AblationVariant::Full));
        assert_eq!(acc.q(1, 1, 1), 1.0);
        let mut c = cfg(AblationVariant::Full);
        c.allow_self_pairs = false;
        assert_eq!(extract_hop_pairs([&s], &c).total_occurrences(), 0);
    }

    #[test]
    fn time_unit_conversion() {
        let s = seq(0, &[1, 2], &[0, 2 * 86_400]);
        let mut c = cfg(AblationVariant::Full);
        c.time_unit_seconds = 86_400;
        c.l_time = 2.0;
        let acc = extract_hop_pairs([&s], &c);
        assert!((acc.q(1, 1, 2) - 0.35).abs() < 1e-15);
        c.l_time = 1.0;
        assert_eq!(extract_hop_pairs([&s], &c).total_occurrences(), 0);
    }

    #[test]
    fn variant_weights() {
        let s = seq(0, &[1, 2, 1, 2], &[0, 32, 40, 60]);
        let q = |v| extract_hop_pairs([&s], &cfg(v)).q(1, 1, 2);
        // (1,2) occurs at gaps 32 and 20
        let full = (0.65 * (64.0 - 32.0) / 64.0 + 0.35) + (0.65 * (64.0 - 20.0) / 64.0 + 0.35);
        assert!((q(AblationVariant::Full) - full).abs() < 1e-15);
        assert_eq!(q(AblationVariant::NoI), 2.0);
        assert_eq!(q(AblationVariant::NoIN), 1.0);
        assert_eq!(q(AblationVariant::NoINT), 1.0);
    }

    #[test]
    fn empty_accumulator_gives_identity() {
        let acc = HopPairAccumulator::new(cfg(AblationVariant::Full));
        let adj = build_weighted_adjacency::<f64>(&acc, 4.5, 2.0, 1.0, 4);
        assert_eq!(adj.a_prime, CsrMatrix::identity(4));
        assert_eq!(adj.a_norm, CsrMatrix::identity(4));
        let table = Mat::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.1);
        assert_eq!(adj.global_embeddings(&table), table);
    }

    fn two_item_acc() -> HopPairAccumulator {
        let mut acc = HopPairAccumulator::new(cfg(AblationVariant::Full));
        acc.add(1, 0, 1, 1.0);
        acc.add(1, 0, 1, 1.0);
        acc.add(1, 1, 0, 1.0);
        acc
    }

    #[test]
    fn two_item_hand_normalization() {
        // q12 = 2, q21 = 1, alpha = 1: A' = [[1,3],[3,1]], D = diag(4,4)
        let adj = build_weighted_adjacency::<f64>(&two_item_acc(), 1.0, 0.0, 0.0, 2);
        assert_eq!(adj.a_prime.to_dense().as_slice(), &[1.0, 3.0, 3.0, 1.0]);
        assert_eq!(adj.degree, vec![4.0, 4.0]);
        let expect = [0.25, 0.75, 0.75, 0.25];
        for (got, want) in adj.a_norm.to_dense().as_slice().iter().zip(expect) {
            assert!((got - want).abs() <= 1e-12);
        }
        let e = Mat::from_vec(2, 2, vec![1.0, 2.0, -3.0, 0.5]);
        let g = adj.global_embeddings(&e);
        let rows = [
            [0.25 * 1.0 + 0.75 * -3.0, 0.25 * 2.0 + 0.75 * 0.5],
            [0.75 * 1.0 + 0.25 * -3.0, 0.75 * 2.0 + 0.25 * 0.5],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!((g.get(r, c) - rows[r][c]).abs() <= 1e-12);
            }
        }
    }

    /// Dense oracle: build A', D and D^{-1/2} A' D^{-1/2} from scratch.
    fn dense_oracle(acc: &HopPairAccumulator, w: [f64; 3], n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut ap = vec![vec![0.0; n]; n];
        for (i, row) in ap.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for mu in 0..n {
            for nu in 0..n {
                for k in 1..=3 {
                    ap[mu][nu] += w[k - 1] * (acc.q(k, mu, nu) + acc.q(k, nu, mu));
                }
            }
        }
        let deg: Vec<f64> = ap.iter().map(|r| r.iter().sum()).collect();
        let norm = (0..n)
            .map(|i| (0..n).map(|j| ap[i][j] / (deg[i].sqrt() * deg[j].sqrt())).collect())
            .collect();
        (ap, norm)
    }

    fn random_acc(rng: &mut ChaCha8Rng, n: usize, entries: usize) -> HopPairAccumulator {
        let mut acc = HopPairAccumulator::new(cfg(AblationVariant::Full));
        for _ in 0..entries {
            let k = rng.gen_range(1..=3);
            acc.add(k, rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0.35..1.0));
        }
        acc
    }

    #[test]
    fn sparse_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let acc = random_acc(&mut rng, n, 12);
            let adj = build_weighted_adjacency::<f64>(&acc, 4.5, 2.0, 1.0, n);
            let (ap, norm) = dense_oracle(&acc, [4.5, 2.0, 1.0], n);
            for i in 0..n {
                for j in 0..n {
                    assert!((adj.a_prime.get(i, j) - ap[i][j]).abs() <= 1e-12);
                    assert!((adj.a_norm.get(i, j) - norm[i][j]).abs() <= 1e-12);
                    assert_eq!(adj.a_prime.get(i, j).to_bits(), adj.a_prime.get(j, i).to_bits());
                    assert_eq!(adj.a_norm.get(i, j).to_bits(), adj.a_norm.get(j, i).to_bits());
                }
                assert!(adj.a_prime.get(i, i) >= 1.0);
                assert!(adj.degree[i] > 0.0);
            }
        }
    }

    #[test]
    fn adjacency_file_round_trip() {
        let adj = build_weighted_adjacency::<f64>(&two_item_acc(), 1.0, 0.0, 0.0, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("adjacency.adj");
        write_adjacency(&p, &adj.a_norm).unwrap();
        assert_eq!(&fs::read(&p).unwrap()[..9], ADJACENCY_MAGIC);
        assert_eq!(read_adjacency(&p).unwrap(), adj.a_norm);
        let e = Mat::from_fn(3, 2, |r, c| (r + c) as f32);
        let q = dir.path().join("global_emb.f32");
        write_embeddings_f32(&q, &e).unwrap();
        assert_eq!(read_embeddings_f32(&q, 2).unwrap(), e);
    }

    proptest! {
        #[test]
        fn weight_in_range_and_monotone(a in 0.0f64..=1.0, l in 1.0f64..200.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let b = 1.0 - a;
            let (lo, hi) = if x <= y { (x * l, y * l) } else { (y * l, x * l) };
            let wl = occurrence_weight(lo, a, b, l);
            let wh = occurrence_weight(hi, a, b, l);
            prop_assert!(wh <= wl + 1e-15);
            prop_assert!(wl <= 1.0 + 1e-12 && wh >= b - 1e-12);
        }

        #[test]
        fn occurrences_bounded_by_three_per_interaction(
            lens in prop::collection::vec(1usize..40, 1..10),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seqs: Vec<UserSequence> = lens.iter().enumerate().map(|(u, &n)| {
                let mut t = 1;
                let ts: Vec<i64> = (0..n).map(|_| { t += rng.gen_range(0..30); t }).collect();
                seq(u, &(0..n).map(|_| rng.gen_range(1..10)).collect::<Vec<_>>(), &ts)
            }).collect();
            let acc = extract_hop_pairs(&seqs, &cfg(AblationVariant::NoINT));
            let total: usize = lens.iter().sum();
            prop_assert!(acc.total_occurrences() as usize <= 3 * total);
        }
    }
}

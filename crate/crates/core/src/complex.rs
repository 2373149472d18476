//! Point clouds, fixed-point distances, filtration schedules, clique complexes
//! and the two simplex-to-register encodings.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{QtdaError, Result};

/// A simplex as a strictly increasing tuple of 0-based vertex indices.
pub type Simplex = Vec<usize>;

/// Two's-complement fixed-point format: `bits` total, `frac_bits` after the binary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub bits: u32,
    pub frac_bits: u32,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint {
            bits: 32,
            frac_bits: 16,
        }
    }
}

impl FixedPoint {
    pub fn new(bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=32).contains(&bits) || frac_bits >= bits {
            return Err(QtdaError::InvalidArgument(format!(
                "fixed-point format needs 2 <= bits <= 32 and frac_bits < bits (got {bits}, {frac_bits})"
            )));
        }
        Ok(FixedPoint { bits, frac_bits })
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// Round to the nearest representable value; range violations are errors.
    pub fn quantize(&self, value: f64, row: usize) -> Result<i64> {
        let err = || QtdaError::Representability {
            row,
            value,
            bits: self.bits,
            frac_bits: self.frac_bits,
        };
        if !value.is_finite() {
            return Err(err());
        }
        let raw = (value * self.scale()).round();
        let max = ((1i64 << (self.bits - 1)) - 1) as f64;
        let min = -((1i64 << (self.bits - 1)) as f64);
        if raw > max || raw < min {
            return Err(err());
        }
        Ok(raw as i64)
    }
}

/// N points in R^d stored as fixed-point integers.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    raw: Vec<Vec<i64>>,
    dim: usize,
    format: FixedPoint,
    labels: Vec<String>,
}

/// Default vertex names: A..Z, then v26, v27, ...
pub fn default_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("v{i}")
            }
        })
        .collect()
}

impl PointCloud {
    pub fn from_f64(rows: &[Vec<f64>], labels: Option<Vec<String>>, format: FixedPoint) -> Result<Self> {
        if rows.is_empty() {
            return Err(QtdaError::Parse("point cloud has no points".into()));
        }
        let dim = rows[0].len();
        let mut raw = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(QtdaError::Dimension {
                    row: r,
                    expected: dim,
                    found: row.len(),
                });
            }
            raw.push(
                row.iter()
                    .map(|&x| format.quantize(x, r))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let labels = match labels {
            Some(l) if l.len() == rows.len() => l,
            Some(l) => {
                return Err(QtdaError::Parse(format!(
                    "{} labels for {} points",
                    l.len(),
                    rows.len()
                )))
            }
            None => default_labels(rows.len()),
        };
        Ok(PointCloud {
            raw,
            dim,
            format,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.raw.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn format(&self) -> FixedPoint {
        self.format
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn raw(&self, i: usize) -> &[i64] {
        &self.raw[i]
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        let s = self.format.scale();
        self.raw[i].iter().map(|&r| r as f64 / s).collect()
    }

    /// Parse comma-separated rows; an optional `# labels: A,B,...` header names the vertices.
    pub fn from_csv_str(text: &str, format: FixedPoint) -> Result<Self> {
        let mut labels = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(names) = rest.trim().strip_prefix("labels:") {
                    labels = Some(names.split(',').map(|s| s.trim().to_string()).collect());
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| QtdaError::Parse(format!("bad number {tok:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_f64(&rows, labels, format)
    }

    /// Parse `{"points": [[..]], "labels": [..], "bits": b, "frac_bits": f}`.
    /// `bits`/`frac_bits` in the document override `default_format`.
    pub fn from_json_str(text: &str, default_format: FixedPoint) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            points: Vec<Vec<f64>>,
            labels: Option<Vec<String>>,
            bits: Option<u32>,
            frac_bits: Option<u32>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| QtdaError::Parse(e.to_string()))?;
        let bits = doc.bits.unwrap_or(default_format.bits);
        let frac = doc
            .frac_bits
            .unwrap_or_else(|| default_format.frac_bits.min(bits.saturating_sub(1)));
        Self::from_f64(&doc.points, doc.labels, FixedPoint::new(bits, frac)?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let points: Vec<Vec<f64>> = (0..self.n()).map(|i| self.coords(i)).collect();
        serde_json::json!({
            "points": points,
            "labels": self.labels,
            "bits": self.format.bits,
            "frac_bits": self.format.frac_bits,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Json,
}

impl std::str::FromStr for CloudFormat {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(CloudFormat::Csv),
            "json" => Ok(CloudFormat::Json),
            other => Err(QtdaError::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_point_cloud(path: &Path, format: CloudFormat, fixed: FixedPoint) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    match format {
        CloudFormat::Csv => PointCloud::from_csv_str(&text, fixed),
        CloudFormat::Json => PointCloud::from_json_str(&text, fixed),
    }
}

/// Exact squared distances in units of 2^(-2·frac_bits), held in u64.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    sq: Vec<u64>,
    frac_bits: u32,
    labels: Vec<String>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sq_raw(&self, i: usize, j: usize) -> u64 {
        self.sq[i * self.n + j]
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.sq_raw(i, j) as f64 / (4f64).powi(self.frac_bits as i32)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    /// Build directly from raw squared distances (row-major, symmetric, zero diagonal).
    pub fn from_raw(n: usize, sq: Vec<u64>, frac_bits: u32) -> Result<Self> {
        if sq.len() != n * n {
            return Err(QtdaError::InvalidArgument("distance matrix size mismatch".into()));
        }
        for i in 0..n {
            if sq[i * n + i] != 0 {
                return Err(QtdaError::InvalidArgument("nonzero diagonal".into()));
            }
            for j in 0..i {
                if sq[i * n + j] != sq[j * n + i] {
                    return Err(QtdaError::InvalidArgument("asymmetric distances".into()));
                }
            }
        }
        Ok(DistanceMatrix {
            n,
            sq,
            frac_bits,
            labels: default_labels(n),
        })
    }
}

pub fn pairwise_distances(cloud: &PointCloud) -> Result<DistanceMatrix> {
    let n = cloud.n();
    let mut sq = vec![0u64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc: u64 = 0;
            for (a, b) in cloud.raw(i).iter().zip(cloud.raw(j)) {
                let diff = (*a as i128) - (*b as i128);
                let term = u64::try_from(diff * diff).map_err(|_| QtdaError::Overflow(i, j))?;
                acc = acc.checked_add(term).ok_or(QtdaError::Overflow(i, j))?;
            }
            sq[i * n + j] = acc;
            sq[j * n + i] = acc;
        }
    }
    Ok(DistanceMatrix {
        n,
        sq,
        frac_bits: cloud.format().frac_bits,
        labels: cloud.labels().to_vec(),
    })
}

/// Strictly increasing squared thresholds; entry 0 is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationSchedule {
    sq_thresholds: Vec<u64>,
    frac_bits: u32,
}

impl FiltrationSchedule {
    pub fn len(&self) -> usize {
        self.sq_thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq_thresholds.is_empty()
    }

    pub fn sq_threshold(&self, i: usize) -> u64 {
        self.sq_thresholds[i]
    }

    pub fn mu(&self, i: usize) -> f64 {
        (self.sq_thresholds[i] as f64).sqrt() / (1u64 << self.frac_bits) as f64
    }

    pub fn mus(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mu(i)).collect()
    }

    /// Index of the first scale whose threshold admits squared distance `sq`.
    pub fn entry_index(&self, sq: u64) -> usize {
        self.sq_thresholds.partition_point(|&t| t < sq)
    }

    /// A user-supplied scale list (μ values); sorted, deduplicated, 0 prepended.
    pub fn from_scales(mus: &[f64], frac_bits: u32) -> Result<Self> {
        let s = (1u64 << frac_bits) as f64;
        let mut t = vec![0u64];
        for &mu in mus {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(QtdaError::InvalidArgument(format!("bad scale {mu}")));
            }
            t.push(((mu * s) * (mu * s)).floor() as u64);
        }
        t.sort_unstable();
        t.dedup();
        Ok(FiltrationSchedule {
            sq_thresholds: t,
            frac_bits,
        })
    }
}

pub fn filtration_scales(dm: &DistanceMatrix) -> FiltrationSchedule {
    let mut t = vec![0u64];
    for i in 0..dm.n() {
        for j in (i + 1)..dm.n() {
            t.push(dm.sq_raw(i, j));
        }
    }
    t.sort_unstable();
    t.dedup();
    FiltrationSchedule {
        sq_thresholds: t,
        frac_bits: dm.frac_bits(),
    }
}

/// Flag complex of the threshold graph, materialized through dimension `k_max + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueComplex {
    scale_index: usize,
    sq_threshold: u64,
    mu: f64,
    n: usize,
    adjacency: Vec<bool>,
    simplices: Vec<Vec<Simplex>>,
    labels: Vec<String>,
}

impl CliqueComplex {
    pub fn scale_index(&self) -> usize {
        self.scale_index
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sq_threshold(&self) -> u64 {
        self.sq_threshold
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: &[usize]) -> String {
        simplex_label(s, &self.labels)
    }

    /// Highest materialized dimension (k_max + 1).
    pub fn top_dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.simplices.get(k).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn index_of(&self, s: &[usize]) -> Option<usize> {
        let k = s.len().checked_sub(1)?;
        self.simplices.get(k)?.binary_search_by(|x| x.as_slice().cmp(s)).ok()
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        self.index_of(s).is_some()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.n + b]
    }

    /// True when every edge of `self` is an edge of `other` (same vertex set).
    pub fn is_subcomplex_of(&self, other: &CliqueComplex) -> bool {
        self.n == other.n
            && self
                .adjacency
                .iter()
                .zip(&other.adjacency)
                .all(|(&a, &b)| !a || b)
    }

    pub fn dump_json(&self, labels_one_based: bool) -> String {
        serde_json::to_string(&ComplexDump {
            cx: self,
            one_based: labels_one_based,
        })
        .expect("complex serializes")
    }
}

struct ComplexDump<'a> {
    cx: &'a CliqueComplex,
    one_based: bool,
}

struct DimMap<'a>(&'a [Vec<Simplex>], usize);

impl Serialize for DimMap<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = ser.serialize_map(Some(self.0.len()))?;
        for (k, simplices) in self.0.iter().enumerate() {
            let shifted: Vec<Vec<usize>> = simplices
                .iter()
                .map(|s| s.iter().map(|v| v + self.1).collect())
                .collect();
            m.serialize_entry(&k.to_string(), &shifted)?;
        }
        m.end()
    }
}

impl Serialize for ComplexDump<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("CliqueComplex", 3)?;
        st.serialize_field("scale_index", &self.cx.scale_index)?;
        st.serialize_field("mu", &self.cx.mu)?;
        st.serialize_field(
            "simplices",
            &DimMap(&self.cx.simplices, usize::from(self.one_based)),
        )?;
        st.end()
    }
}

/// Build the complex at scale `scale_index` of `schedule`.
pub fn build_clique_complex(
    dm: &DistanceMatrix,
    schedule: &FiltrationSchedule,
    scale_index: usize,
    k_max: usize,
) -> Result<CliqueComplex> {
    if scale_index >= schedule.len() {
        return Err(QtdaError::InvalidArgument(format!(
            "scale index {scale_index} out of range ({} scales)",
            schedule.len()
        )));
    }
    build_clique_complex_at(
        dm,
        schedule.sq_threshold(scale_index),
        schedule.mu(scale_index),
        scale_index,
        k_max,
    )
}

/// Build the complex for an explicit squared threshold (raw fixed-point units).
pub fn build_clique_complex_at(
    dm: &DistanceMatrix,
    sq_threshold: u64,
    mu: f64,
    scale_index: usize,
    k_max: usize,
) -> Result<CliqueComplex> {
    let n = dm.n();
    if n > 0 && k_max > n - 1 {
        return Err(QtdaError::InvalidArgument(format!(
            "k_max = {k_max} exceeds N - 1 = {}",
            n - 1
        )));
    }
    let mut adjacency = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            adjacency[i * n + j] = i != j && dm.sq_raw(i, j) <= sq_threshold;
        }
    }
    let mut simplices: Vec<Vec<Simplex>> = vec![(0..n).map(|v| vec![v]).collect()];
    for _ in 0..=k_max {
        let prev = simplices.last().expect("nonempty");
        let mut next = Vec::new();
        for s in prev {
            let last = *s.last().expect("nonempty simplex");
            for v in (last + 1)..n {
                if s.iter().all(|&u| adjacency[u * n + v]) {
                    let mut t = s.clone();
                    t.push(v);
                    next.push(t);
                }
            }
        }
        simplices.push(next);
    }
    Ok(CliqueComplex {
        scale_index,
        sq_threshold,
        mu,
        n,
        adjacency,
        simplices,
        labels: dm.labels().to_vec(),
    })
}

fn check_ordered(s: &[usize], n: usize) -> Result<()> {
    if s.is_empty() {
        return Err(QtdaError::InvalidSimplex("empty tuple".into()));
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QtdaError::InvalidSimplex(format!(
            "{s:?} is not strictly increasing"
        )));
    }
    if s.iter().any(|&v| v >= n) {
        return Err(QtdaError::InvalidSimplex(format!("{s:?} has a vertex >= N = {n}")));
    }
    Ok(())
}

/// Classical semantics of the membership oracle: order check, then all edge tests.
pub fn membership(s: &[usize], cx: &CliqueComplex) -> Result<bool> {
    check_ordered(s, cx.n())?;
    for (a, &u) in s.iter().enumerate() {
        for &v in &s[a + 1..] {
            if !cx.adjacent(u, v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapping {
    Direct,
    Compact,
}

impl std::str::FromStr for Mapping {
    type Err = QtdaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Mapping::Direct),
            "compact" => Ok(Mapping::Compact),
            other => Err(QtdaError::InvalidArgument(format!("unknown mapping {other:?}"))),
        }
    }
}

/// Register payload of a simplex under one of the two qubit mappings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimplexEncoding {
    /// N-bit mask; bit `v-1` (leftmost first) set for each 1-based vertex v.
    Direct { n: usize, mask: Vec<bool> },
    /// Registers of `width` bits holding 1-based vertices; 0 marks an absent vertex.
    Compact { width: usize, registers: Vec<usize> },
}

pub fn compact_register_width(n: usize) -> usize {
    let mut w = 0;
    while (1usize << w) < n + 1 {
        w += 1;
    }
    w
}

impl SimplexEncoding {
    pub fn kind(&self) -> Mapping {
        match self {
            SimplexEncoding::Direct { .. } => Mapping::Direct,
            SimplexEncoding::Compact { .. } => Mapping::Compact,
        }
    }

    pub fn qubits(&self) -> usize {
        match self {
            SimplexEncoding::Direct { n, .. } => *n,
            SimplexEncoding::Compact { width, registers } => width * registers.len(),
        }
    }

    /// Decode back to a 1-based increasing tuple.
    pub fn decode(&self) -> Result<Vec<usize>> {
        match self {
            SimplexEncoding::Direct { mask, .. } => {
                let s: Vec<usize> = mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i + 1)
                    .collect();
                if s.is_empty() {
                    return Err(QtdaError::InvalidSimplex("empty mask".into()));
                }
                Ok(s)
            }
            SimplexEncoding::Compact { width, registers } => {
                let limit = 1usize << width;
                let first = registers.iter().position(|&r| r != 0).ok_or_else(|| {
                    QtdaError::InvalidSimplex("all registers empty".into())
                })?;
                let s = &registers[first..];
                if s.iter().any(|&r| r == 0 || r >= limit) {
                    return Err(QtdaError::InvalidSimplex(format!(
                        "register payload {registers:?} has an interior empty or oversized register"
                    )));
                }
                if s.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(QtdaError::InvalidSimplex(format!(
                        "registers {registers:?} are not increasing"
                    )));
                }
                Ok(s.to_vec())
            }
        }
    }
}

impl fmt::Display for SimplexEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplexEncoding::Direct { mask, .. } => {
                for &b in mask {
                    write!(f, "{}", u8::from(b))?;
                }
                Ok(())
            }
            SimplexEncoding::Compact { width, registers } => {
                let parts: Vec<String> = registers
                    .iter()
                    .map(|r| format!("{:0w$b}", r, w = *width))
                    .collect();
                write!(f, "{}", parts.join(" "))
            }
        }
    }
}

/// Encode a 1-based, strictly increasing vertex tuple over `n` vertices.
pub fn encode_simplex(s: &[usize], kind: Mapping, n: usize) -> Result<SimplexEncoding> {
    if s.iter().any(|&v| v == 0 || v > n) {
        return Err(QtdaError::InvalidSimplex(format!(
            "{s:?} has a vertex outside 1..={n}"
        )));
    }
    let zero_based: Vec<usize> = s.iter().map(|v| v - 1).collect();
    check_ordered(&zero_based, n)?;
    Ok(match kind {
        Mapping::Direct => {
            let mut mask = vec![false; n];
            for &v in s {
                mask[v - 1] = true;
            }
            SimplexEncoding::Direct { n, mask }
        }
        Mapping::Compact => SimplexEncoding::Compact {
            width: compact_register_width(n),
            registers: s.to_vec(),
        },
    })
}

/// Compact payload padded with leading empty registers up to `registers` slots.
pub fn encode_compact_padded(s: &[usize], n: usize, registers: usize) -> Result<SimplexEncoding> {
    if s.len() > registers {
        return Err(QtdaError::InvalidSimplex(format!(
            "{} vertices do not fit in {registers} registers",
            s.len()
        )));
    }
    let SimplexEncoding::Compact { width, registers: r } = encode_simplex(s, Mapping::Compact, n)?
    else {
        unreachable!()
    };
    let mut padded = vec![0; registers - r.len()];
    padded.extend(r);
    Ok(SimplexEncoding::Compact {
        width,
        registers: padded,
    })
}

/// Distortion certificate for a random projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JlCertificate {
    pub target_dim: usize,
    pub attempts: u32,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

pub const JL_CONSTANT: f64 = 8.0;
pub const JL_MAX_ATTEMPTS: u32 = 64;

pub fn jl_target_dim(n: usize, eps: f64) -> usize {
    (JL_CONSTANT * (n.max(2) as f64).ln() / (eps * eps)).ceil() as usize
}

/// Gaussian random projection to ceil(8 ln N / eps²) dimensions, redrawn until
/// every pairwise distance ratio lies in [1 - eps, 1 + eps].
pub fn jl_project(cloud: &PointCloud, eps: f64, seed: u64) -> Result<(PointCloud, JlCertificate)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QtdaError::InvalidArgument(format!("eps_jl must lie in (0, 1), got {eps}")));
    }
    let m = jl_target_dim(cloud.n(), eps);
    let d = cloud.dim();
    if m >= d {
        return Err(QtdaError::Infeasible(format!(
            "target dimension {m} is not below input dimension {d}"
        )));
    }
    let source = pairwise_distances(cloud)?;
    let coords: Vec<Vec<f64>> = (0..cloud.n()).map(|i| cloud.coords(i)).collect();
    let norm = 1.0 / (m as f64).sqrt();
    for attempt in 0..JL_MAX_ATTEMPTS {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let proj: Vec<f64> = (0..m * d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * norm
            })
            .collect();
        let rows: Vec<Vec<f64>> = coords
            .iter()
            .map(|x| {
                (0..m)
                    .map(|r| proj[r * d..(r + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let out = PointCloud::from_f64(&rows, Some(cloud.labels().to_vec()), cloud.format())?;
        let dm = pairwise_distances(&out)?;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut ok = true;
        for i in 0..cloud.n() {
            for j in (i + 1)..cloud.n() {
                let a = source.dist(i, j);
                let b = dm.dist(i, j);
                if a == 0.0 {
                    ok &= b == 0.0;
                    continue;
                }
                let r = b / a;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if ok && lo >= 1.0 - eps && hi <= 1.0 + eps {
            if lo.is_infinite() {
                lo = 1.0;
                hi = 1.0;
            }
            return Ok((
                out,
                JlCertificate {
                    target_dim: m,
                    attempts: attempt + 1,
                    min_ratio: lo,
                    max_ratio: hi,
                },
            ));
        }
    }
    Err(QtdaError::Infeasible(format!(
        "no projection met the distortion bound in {JL_MAX_ATTEMPTS} draws"
    )))
}

/// Human-readable simplex name from vertex labels, e.g. "CDE".
pub fn simplex_label(s: &[usize], labels: &[String]) -> String {
    if s.iter().all(|&v| labels.get(v).is_some_and(|l| l.chars().count() == 1)) {
        s.iter().map(|&v| labels[v].as_str()).collect()
    } else {
        s.iter()
            .map(|&v| labels.get(v).cloned().unwrap_or_else(|| v.to_string()))
            .collect::<Vec<_>>()
            .join("-")
    }
}

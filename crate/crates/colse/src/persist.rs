//! Versioned single-file model serialization with integrity checking.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! [0..8)    magic "COLSEMDL"
//! [8..12)   format version, u32
//! [12..16)  section count, u32
//! then      section table: (id u32, offset u64, length u64) per section
//! then      section payloads, in table order, no padding
//! last 4    CRC32 (IEEE) of every preceding byte
//! ```
//!
//! Sections: 1 = metadata, 2 = marginals, 3 = thetas, 4 = ecn (absent in
//! JPE-only bundles). Offsets are absolute file positions. Inverse-CDF
//! lookup tables are derived state and never serialized; they are rebuilt
//! when marginals are reconstructed. Serialization is canonical: the same
//! bundle always produces the same bytes, so save∘load∘save is
//! byte-idempotent. A hex-annotated walkthrough lives in
//! `docs/model-format.md`.

use std::fmt;
use std::fs;
use std::path::Path;

use colse_core::copula::ThetaMatrix;
use colse_core::ecn::{apply_correction, featurize, EcnModel};
use colse_core::jpe::{DVineModel, QueryBounds};
use colse_core::marginal::MarginalCdf;
use colse_core::table::{schema_fingerprint, ColumnKind, ColumnMeta};

pub const MAGIC: [u8; 8] = *b"COLSEMDL";
pub const FORMAT_VERSION: u32 = 1;

/// ECN "format flag": how the magnitude head is to be read. Only variant 0
/// (raw log-space magnitude, floored at zero when applied) is defined;
/// the byte exists so an alternative reading can ship without a bump of
/// the whole-file version.
pub const ECN_MAGNITUDE_RAW: u8 = 0;

const SEC_METADATA: u32 = 1;
const SEC_MARGINALS: u32 = 2;
const SEC_THETAS: u32 = 3;
const SEC_ECN: u32 = 4;

/// Everything estimation needs, in one movable value: schema (for name
/// and label resolution), the joint-CDF model, and the optional error
/// network. `seed` and `bins` record how the model was built.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub columns: Vec<ColumnMeta>,
    pub dvine: DVineModel,
    pub ecn: Option<EcnModel>,
    pub seed: u64,
    pub bins: u32,
}

/// The three estimates produced for every query, as selectivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateSet {
    pub jpe: f64,
    /// ECN-corrected JPE; equals `jpe` without an ECN or when the sign
    /// gate declines to act.
    pub corrected: f64,
    pub avi: f64,
}

impl ModelBundle {
    /// Hash of column names, kinds, and encodings; estimation against a
    /// table with a different fingerprint is refused upstream.
    pub fn fingerprint(&self) -> u64 {
        schema_fingerprint(&self.columns)
    }

    /// Run the full estimator stack on projected query bounds.
    pub fn estimate(&self, q: &QueryBounds) -> EstimateSet {
        let jpe = self.dvine.estimate(q);
        let avi = self.dvine.avi_estimate(q);
        let corrected = match &self.ecn {
            Some(ecn) if !q.empty && !q.ranges.is_empty() => {
                let feats = featurize(&self.dvine, q, jpe, avi);
                let (m_hat, p_plus, p_minus) = ecn.predict(&feats);
                apply_correction(jpe, m_hat, p_plus, p_minus, self.dvine.s_min())
            }
            // the contractual zero/one sits outside the network's reach
            _ => jpe,
        };
        EstimateSet { jpe, corrected, avi }
    }
}

/// Why a model file failed to save or load. The corruption variants are
/// deliberately distinct so operators can tell a wrong file from a damaged
/// one.
#[derive(Debug)]
pub enum PersistError {
    Io(std::io::Error),
    /// First 8 bytes are not the model magic: not a model file at all.
    BadMagic,
    /// Magic matched but the version is not one this reader knows.
    UnknownVersion(u32),
    /// A section (or the header/table itself) runs past the end of file.
    Truncated { what: &'static str },
    /// Stored checksum does not match the file contents.
    CrcMismatch { stored: u32, computed: u32 },
    /// Required section absent from the table.
    MissingSection(&'static str),
    /// Bytes were intact per CRC but structurally invalid.
    Malformed(String),
}

impl fmt::Display for PersistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PersistError::Io(e) => write!(f, "model file io: {e}"),
            PersistError::BadMagic => write!(f, "not a model file (bad magic)"),
            PersistError::UnknownVersion(v) => write!(f, "unknown model format version {v}"),
            PersistError::Truncated { what } => write!(f, "model file truncated: {what}"),
            PersistError::CrcMismatch { stored, computed } => {
                write!(f, "model file corrupt: crc stored {stored:08x}, computed {computed:08x}")
            }
            PersistError::MissingSection(s) => write!(f, "model file missing section: {s}"),
            PersistError::Malformed(s) => write!(f, "model file malformed: {s}"),
        }
    }
}

impl std::error::Error for PersistError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            PersistError::Io(e) => Some(e),
            _ => None,
        }
    }
}

/// Serialize and write; returns bytes written.
pub fn save(bundle: &ModelBundle, path: &Path) -> Result<u64, PersistError> {
    let bytes = to_bytes(bundle);
    fs::write(path, &bytes).map_err(PersistError::Io)?;
    Ok(bytes.len() as u64)
}

/// Read, verify, and reconstruct.
pub fn load(path: &Path) -> Result<ModelBundle, PersistError> {
    let bytes = fs::read(path).map_err(PersistError::Io)?;
    from_bytes(&bytes)
}

/// Canonical serialization of a bundle.
pub fn to_bytes(bundle: &ModelBundle) -> Vec<u8> {
    let mut sections: Vec<(u32, Vec<u8>)> = vec![
        (SEC_METADATA, encode_metadata(bundle)),
        (SEC_MARGINALS, encode_marginals(bundle.dvine.marginals())),
        (SEC_THETAS, encode_thetas(bundle.dvine.thetas())),
    ];
    if let Some(ecn) = &bundle.ecn {
        sections.push((SEC_ECN, encode_ecn(ecn)));
    }

    let table_len = 16 + sections.len() * 20;
    let mut out = Vec::with_capacity(
        table_len + sections.iter().map(|(_, b)| b.len()).sum::<usize>() + 4,
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    let mut offset = table_len as u64;
    for (id, body) in &sections {
        out.extend_from_slice(&id.to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        offset += body.len() as u64;
    }
    for (_, body) in &sections {
        out.extend_from_slice(body);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parse a bundle out of bytes. Structural checks run in a fixed order so
/// each kind of damage gets its own error: magic, version, section bounds
/// (truncation), checksum, then content.
pub fn from_bytes(bytes: &[u8]) -> Result<ModelBundle, PersistError> {
    if bytes.len() < 8 {
        return Err(PersistError::Truncated { what: "header" });
    }
    if bytes[0..8] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    if bytes.len() < 16 + 4 {
        return Err(PersistError::Truncated { what: "header" });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(PersistError::UnknownVersion(version));
    }
    let n_sections = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let table_end = 16 + n_sections * 20;
    let payload_end = bytes.len() - 4;
    if table_end > payload_end {
        return Err(PersistError::Truncated { what: "section table" });
    }

    let mut sections: Vec<(u32, usize, usize)> = Vec::with_capacity(n_sections);
    for k in 0..n_sections {
        let base = 16 + k * 20;
        let id = u32::from_le_bytes(bytes[base..base + 4].try_into().unwrap());
        let off = u64::from_le_bytes(bytes[base + 4..base + 12].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(bytes[base + 12..base + 20].try_into().unwrap()) as usize;
        if off.checked_add(len).map(|end| end > payload_end).unwrap_or(true) {
            return Err(PersistError::Truncated {
                what: section_name(id),
            });
        }
        sections.push((id, off, len));
    }

    let stored = u32::from_le_bytes(bytes[payload_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..payload_end]);
    if stored != computed {
        return Err(PersistError::CrcMismatch { stored, computed });
    }

    let find = |id: u32| -> Option<&[u8]> {
        sections.iter().find(|&&(sid, _, _)| sid == id).map(|&(_, off, len)| &bytes[off..off + len])
    };

    let meta_bytes = find(SEC_METADATA).ok_or(PersistError::MissingSection("metadata"))?;
    let (columns, row_count, seed, bins, stored_fp) = decode_metadata(meta_bytes)?;
    let marginals = decode_marginals(
        find(SEC_MARGINALS).ok_or(PersistError::MissingSection("marginals"))?,
        columns.len(),
    )?;
    let thetas = decode_thetas(
        find(SEC_THETAS).ok_or(PersistError::MissingSection("thetas"))?,
        columns.len(),
    )?;
    let ecn = match find(SEC_ECN) {
        Some(b) => Some(decode_ecn(b, columns.len())?),
        None => None,
    };

    let computed_fp = schema_fingerprint(&columns);
    if stored_fp != computed_fp {
        return Err(PersistError::Malformed(format!(
            "schema fingerprint {stored_fp:016x} does not match stored columns ({computed_fp:016x})"
        )));
    }

    Ok(ModelBundle {
        columns,
        dvine: DVineModel::new(marginals, thetas, row_count),
        ecn,
        seed,
        bins,
    })
}

fn section_name(id: u32) -> &'static str {
    match id {
        SEC_METADATA => "metadata",
        SEC_MARGINALS => "marginals",
        SEC_THETAS => "thetas",
        SEC_ECN => "ecn",
        _ => "unknown section",
    }
}

// ---- encoding -------------------------------------------------------------

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_metadata(bundle: &ModelBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&bundle.fingerprint().to_le_bytes());
    out.extend_from_slice(&bundle.dvine.row_count().to_le_bytes());
    out.extend_from_slice(&bundle.seed.to_le_bytes());
    out.extend_from_slice(&bundle.bins.to_le_bytes());
    out.extend_from_slice(&(bundle.columns.len() as u32).to_le_bytes());
    for c in &bundle.columns {
        put_str(&mut out, &c.name);
        out.push(match c.kind {
            ColumnKind::Continuous => 0,
            ColumnKind::DiscreteNumeric => 1,
            ColumnKind::Categorical => 2,
        });
        out.extend_from_slice(&(c.distinct_count as u64).to_le_bytes());
        out.extend_from_slice(&c.domain_lo.to_le_bytes());
        out.extend_from_slice(&c.domain_hi.to_le_bytes());
        out.extend_from_slice(&(c.encoding.len() as u32).to_le_bytes());
        for label in &c.encoding {
            put_str(&mut out, label);
        }
    }
    out
}

fn encode_marginals(marginals: &[MarginalCdf]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(marginals.len() as u32).to_le_bytes());
    for m in marginals {
        out.extend_from_slice(&(m.knots_x().len() as u32).to_le_bytes());
        put_f64s(&mut out, m.knots_x());
        put_f64s(&mut out, m.knots_y());
        put_f64s(&mut out, m.derivs());
    }
    out
}

fn encode_thetas(t: &ThetaMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(t.n() as u32).to_le_bytes());
    put_f64s(&mut out, t.upper());
    out
}

fn encode_ecn(ecn: &EcnModel) -> Vec<u8> {
    let mut out = vec![ECN_MAGNITUDE_RAW];
    out.extend_from_slice(&(ecn.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ecn.weights().len() as u32).to_le_bytes());
    for (w, b) in ecn.weights().iter().zip(ecn.biases()) {
        out.extend_from_slice(&(w.len() as u64).to_le_bytes());
        put_f64s(&mut out, w);
        out.extend_from_slice(&(b.len() as u64).to_le_bytes());
        put_f64s(&mut out, b);
    }
    out
}

// ---- decoding -------------------------------------------------------------

/// Bounds-checked little-endian reader over one section.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], section: &'static str) -> Self {
        Reader { buf, pos: 0, section }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(PersistError::Truncated { what: self.section })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PersistError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PersistError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PersistError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, PersistError> {
        let raw = self.bytes(n.checked_mul(8).ok_or(PersistError::Truncated { what: self.section })?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn str(&mut self) -> Result<String, PersistError> {
        let len = self.u32()? as usize;
        let raw = self.bytes(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| PersistError::Malformed(format!("non-utf8 string in {} section", self.section)))
    }

    fn done(&self) -> Result<(), PersistError> {
        if self.pos != self.buf.len() {
            return Err(PersistError::Malformed(format!(
                "{} section has {} unread trailing bytes",
                self.section,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

type Metadata = (Vec<ColumnMeta>, u64, u64, u32, u64);

fn decode_metadata(buf: &[u8]) -> Result<Metadata, PersistError> {
    let mut r = Reader::new(buf, "metadata");
    let fingerprint = r.u64()?;
    let row_count = r.u64()?;
    let seed = r.u64()?;
    let bins = r.u32()?;
    let n_cols = r.u32()? as usize;
    if n_cols == 0 {
        return Err(PersistError::Malformed("model has no columns".into()));
    }
    // capacity capped: counts come from the file and could be forged
    let mut columns = Vec::with_capacity(n_cols.min(1024));
    for _ in 0..n_cols {
        let name = r.str()?;
        let kind = match r.u8()? {
            0 => ColumnKind::Continuous,
            1 => ColumnKind::DiscreteNumeric,
            2 => ColumnKind::Categorical,
            k => return Err(PersistError::Malformed(format!("unknown column kind tag {k}"))),
        };
        let distinct_count = r.u64()? as usize;
        let domain_lo = r.f64()?;
        let domain_hi = r.f64()?;
        let n_labels = r.u32()? as usize;
        let mut encoding = Vec::with_capacity(n_labels.min(4096));
        for _ in 0..n_labels {
            encoding.push(r.str()?);
        }
        if (kind == ColumnKind::Categorical) != !encoding.is_empty() {
            return Err(PersistError::Malformed(format!(
                "column '{name}': encoding presence inconsistent with kind"
            )));
        }
        columns.push(ColumnMeta { name, kind, distinct_count, domain_lo, domain_hi, encoding });
    }
    r.done()?;
    Ok((columns, row_count, seed, bins, fingerprint))
}

fn decode_marginals(buf: &[u8], expect: usize) -> Result<Vec<MarginalCdf>, PersistError> {
    let mut r = Reader::new(buf, "marginals");
    let n = r.u32()? as usize;
    if n != expect {
        return Err(PersistError::Malformed(format!(
            "{n} marginals stored for {expect} columns"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let k = r.u32()? as usize;
        let knots_x = r.f64s(k)?;
        let knots_y = r.f64s(k)?;
        let derivs = r.f64s(k)?;
        let m = MarginalCdf::from_parts(knots_x, knots_y, derivs)
            .map_err(|e| PersistError::Malformed(format!("marginal {i}: {e}")))?;
        out.push(m);
    }
    r.done()?;
    Ok(out)
}

fn decode_thetas(buf: &[u8], expect: usize) -> Result<ThetaMatrix, PersistError> {
    let mut r = Reader::new(buf, "thetas");
    let n = r.u32()? as usize;
    if n != expect {
        return Err(PersistError::Malformed(format!(
            "theta matrix is {n}-dimensional for {expect} columns"
        )));
    }
    let upper = r.f64s(n * (n.saturating_sub(1)) / 2)?;
    // reject here so ThetaMatrix's range assert can never fire on file data
    if upper.iter().any(|t| !(1.0..=colse_core::copula::THETA_MAX).contains(t)) {
        return Err(PersistError::Malformed("theta outside the fitted range".into()));
    }
    r.done()?;
    Ok(ThetaMatrix::from_upper(n, upper))
}

fn decode_ecn(buf: &[u8], attr_count: usize) -> Result<EcnModel, PersistError> {
    let mut r = Reader::new(buf, "ecn");
    let flag = r.u8()?;
    if flag != ECN_MAGNITUDE_RAW {
        return Err(PersistError::Malformed(format!("unknown ecn format flag {flag}")));
    }
    let input_dim = r.u32()? as usize;
    if input_dim != 2 * attr_count + 2 {
        return Err(PersistError::Malformed(format!(
            "ecn input width {input_dim} does not fit {attr_count} columns"
        )));
    }
    let n_layers = r.u32()? as usize;
    let mut weights = Vec::with_capacity(n_layers.min(64));
    let mut biases = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let wn = r.u64()? as usize;
        weights.push(r.f64s(wn)?);
        let bn = r.u64()? as usize;
        biases.push(r.f64s(bn)?);
    }
    r.done()?;
    EcnModel::from_parts(input_dim, weights, biases)
        .map_err(|e| PersistError::Malformed(format!("ecn topology: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use colse_core::copula::fit_theta_matrix;
    use colse_core::ecn::EcnModel;
    use colse_core::jpe::project_query;
    use colse_core::marginal::fit_marginal;
    use colse_core::table::{build_numeric_column, build_string_column, Predicate, PredicateOp, Literal, Table};

    /// Small mixed-schema bundle with a freshly initialized (untrained) ECN.
    fn bundle() -> (Table, ModelBundle) {
        let (c1, v1) = build_numeric_column(
            "amount",
            (0..200).map(|i| (i as f64 * 7.3) % 50.0).collect(),
            None,
        )
        .unwrap();
        let (c2, v2) = build_string_column(
            "tag",
            &(0..200).map(|i| format!("t{}", i % 5)).collect::<Vec<_>>(),
        )
        .unwrap();
        let t = Table::from_parts(vec![c1, c2], vec![v1, v2]).unwrap();
        let m0 = fit_marginal(t.column(0), 64, false).unwrap();
        let m1 = fit_marginal(t.column(1), 64, true).unwrap();
        let thetas = fit_theta_matrix(&[t.column(0), t.column(1)]);
        let dvine = DVineModel::new(vec![m0, m1], thetas, t.row_count() as u64);
        let ecn = EcnModel::new(2, 9);
        let b = ModelBundle {
            columns: t.columns().to_vec(),
            dvine,
            ecn: Some(ecn),
            seed: 42,
            bins: 64,
        };
        (t, b)
    }

    fn sample_query(t: &Table) -> colse_core::jpe::QueryBounds {
        let preds = vec![
            Predicate { column: 0, op: PredicateOp::Ge, literal: Literal::Number(5.0) },
            Predicate { column: 0, op: PredicateOp::Le, literal: Literal::Number(30.0) },
            Predicate { column: 1, op: PredicateOp::Eq, literal: Literal::Label("t2".into()) },
        ];
        project_query(t.columns(), &preds).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise_and_estimates_match() {
        let (t, b) = bundle();
        let bytes = to_bytes(&b);
        let back = from_bytes(&bytes).unwrap();

        // canonical: save∘load∘save is byte-identical
        assert_eq!(bytes, to_bytes(&back), "serialization is not canonical");

        // all floats bitwise equal
        for (a, c) in b.dvine.marginals().iter().zip(back.dvine.marginals()) {
            assert_eq!(a.knots_x(), c.knots_x());
            assert_eq!(a.knots_y(), c.knots_y());
            assert_eq!(a.derivs(), c.derivs());
        }
        assert_eq!(b.dvine.thetas().upper(), back.dvine.thetas().upper());

        // estimates from the loaded model are bit-for-bit the same
        let q = sample_query(&t);
        let e1 = b.estimate(&q);
        let e2 = back.estimate(&q);
        assert_eq!(e1.jpe.to_bits(), e2.jpe.to_bits());
        assert_eq!(e1.corrected.to_bits(), e2.corrected.to_bits());
        assert_eq!(e1.avi.to_bits(), e2.avi.to_bits());
    }

    #[test]
    fn jpe_only_bundle_omits_ecn_section() {
        let (_, mut b) = bundle();
        b.ecn = None;
        let bytes = to_bytes(&b);
        let back = from_bytes(&bytes).unwrap();
        assert!(back.ecn.is_none(), "loader should report ecn_present = false");
        // three sections, not four
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    }

    #[test]
    fn bad_magic_is_its_own_error() {
        let (_, b) = bundle();
        let mut bytes = to_bytes(&b);
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(PersistError::BadMagic)));
    }

    #[test]
    fn flipped_payload_byte_is_a_crc_mismatch() {
        let (_, b) = bundle();
        let mut bytes = to_bytes(&b);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(from_bytes(&bytes), Err(PersistError::CrcMismatch { .. })));
    }

    #[test]
    fn truncation_is_reported_as_truncation() {
        let (_, b) = bundle();
        let bytes = to_bytes(&b);
        // cut the file mid-marginals-section: section bounds now exceed EOF
        let cut = bytes.len() / 2;
        assert!(matches!(
            from_bytes(&bytes[..cut]),
            Err(PersistError::Truncated { .. })
        ));
    }

    #[test]
    fn unknown_version_rejected() {
        let (_, b) = bundle();
        let mut bytes = to_bytes(&b);
        bytes[8] = 99;
        assert!(matches!(from_bytes(&bytes), Err(PersistError::UnknownVersion(99))));
    }

    #[test]
    fn header_scraps_are_truncation_not_panic() {
        assert!(matches!(from_bytes(b"COLSE"), Err(PersistError::Truncated { .. })));
        assert!(matches!(from_bytes(b"COLSEMDL"), Err(PersistError::Truncated { .. })));
        assert!(matches!(from_bytes(b""), Err(PersistError::Truncated { .. })));
    }

    #[test]
    fn corrected_estimate_defaults_to_jpe_without_ecn() {
        let (t, mut b) = bundle();
        b.ecn = None;
        let q = sample_query(&t);
        let e = b.estimate(&q);
        assert_eq!(e.jpe, e.corrected);
    }

    #[test]
    fn empty_query_bounds_bypass_the_network() {
        let (_, b) = bundle();
        let q = QueryBounds { ranges: vec![], empty: true };
        let e = b.estimate(&q);
        assert_eq!(e.jpe, 0.0);
        assert_eq!(e.corrected, 0.0);
    }

    #[test]
    fn file_round_trip() {
        let (_, b) = bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.colse");
        let written = save(&b, &path).unwrap();
        assert_eq!(written, fs::metadata(&path).unwrap().len());
        let back = load(&path).unwrap();
        assert_eq!(to_bytes(&b), to_bytes(&back));
    }
}

//! QUBO and Ising representations with a bit-exact text interchange format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Upper-triangular sparse QUBO: `objective(x) = sum_{i<=j} Q[i,j] x_i x_j + offset`.
/// Explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    n: usize,
    coefficients: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl Qubo {
    pub fn new(n: usize, offset: f64) -> Self {
        Qubo {
            n,
            coefficients: BTreeMap::new(),
            offset,
        }
    }

    /// Sets `Q[i,j]` for `i <= j`; zero values remove the entry.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i <= j && j < self.n, "index ({i},{j}) out of range");
        if value == 0.0 {
            self.coefficients.remove(&(i, j));
        } else {
            self.coefficients.insert((i, j), value);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coefficients.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn num_entries(&self) -> usize {
        self.coefficients.len()
    }

    /// Entries in `(i, j)` order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coefficients.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn objective(&self, x: &[bool]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut total = self.offset;
        for (&(i, j), &v) in &self.coefficients {
            if x[i] && x[j] {
                total += v;
            }
        }
        Ok(total)
    }
}

/// Ising model over spins `z in {-1,+1}^n`:
/// `energy(z) = sum_{i<j} J[i,j] z_i z_j + sum_i h_i z_i + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    pub n: usize,
    pub couplings: BTreeMap<(usize, usize), f64>,
    pub fields: Vec<f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, z: &[i8]) -> Result<f64> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: z.len(),
            });
        }
        let mut total = self.offset;
        for (&(i, j), &v) in &self.couplings {
            total += v * f64::from(z[i]) * f64::from(z[j]);
        }
        for (i, &h) in self.fields.iter().enumerate() {
            total += h * f64::from(z[i]);
        }
        Ok(total)
    }
}

/// Energy-preserving transform under `z_i = 1 - 2 x_i` (including the offset
/// adjustment), so `energy(z) == objective(x)` exactly on every assignment.
pub fn to_ising(q: &Qubo) -> IsingModel {
    let n = q.num_variables();
    let mut couplings = BTreeMap::new();
    let mut fields = vec![0.0f64; n];
    let mut offset = q.offset();
    for (i, j, v) in q.entries() {
        if i == j {
            // Q_ii x_i = Q_ii (1 - z_i) / 2
            fields[i] -= v / 2.0;
            offset += v / 2.0;
        } else {
            // Q_ij x_i x_j = Q_ij (1 - z_i)(1 - z_j) / 4
            let quarter = v / 4.0;
            couplings
                .entry((i, j))
                .and_modify(|c| *c += quarter)
                .or_insert(quarter);
            fields[i] -= quarter;
            fields[j] -= quarter;
            offset += quarter;
        }
    }
    couplings.retain(|_, v| *v != 0.0);
    IsingModel {
        n,
        couplings,
        fields,
        offset,
    }
}

/// Converts an assignment to its `0`/`1` string form.
pub fn bits_to_string(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Parses a `0`/`1` string into an assignment.
pub fn bits_from_str(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidParameter(format!(
                "invalid bit character `{other}`"
            ))),
        })
        .collect()
}

// 17 significant digits round-trip any f64 exactly through decimal text.
fn decimal(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes a QUBO to its text format:
/// header `qubo <n> <nnz>`, then `offset <decimal>`, then one `<i> <j>
/// <decimal>` entry per line with `i <= j`, sorted by `(i, j)`, single-space
/// separated and LF-terminated.
pub fn qubo_to_text(q: &Qubo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubo {} {}", q.num_variables(), q.num_entries());
    let _ = writeln!(out, "offset {}", decimal(q.offset()));
    for (i, j, v) in q.entries() {
        let _ = writeln!(out, "{i} {j} {}", decimal(v));
    }
    out
}

/// Serializes an Ising model analogously with header `ising <n> <nnz>`;
/// entries with `i == j` carry the field `h_i`, entries with `i < j` the
/// coupling `J_ij`.
pub fn ising_to_text(m: &IsingModel) -> String {
    let mut entries: BTreeMap<(usize, usize), f64> = m.couplings.clone();
    for (i, &h) in m.fields.iter().enumerate() {
        if h != 0.0 {
            entries.insert((i, i), h);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "ising {} {}", m.n, entries.len());
    let _ = writeln!(out, "offset {}", decimal(m.offset));
    for ((i, j), v) in entries {
        let _ = writeln!(out, "{i} {j} {}", decimal(v));
    }
    out
}

pub fn export_qubo(q: &Qubo, path: &Path) -> Result<()> {
    std::fs::write(path, qubo_to_text(q))?;
    Ok(())
}

pub fn export_ising(m: &IsingModel, path: &Path) -> Result<()> {
    std::fs::write(path, ising_to_text(m))?;
    Ok(())
}

fn malformed(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses the QUBO text format, rejecting malformed headers, out-of-range or
/// lower-triangular indices and duplicate entries with the offending line
/// number.
pub fn qubo_from_text(text: &str, path: &str) -> Result<Qubo> {
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 3 || fields[0] != "qubo" {
        return Err(malformed(path, 1, "expected header `qubo <n> <nnz>`"));
    }
    let n: usize = fields[1]
        .parse()
        .map_err(|_| malformed(path, 1, "bad variable count"))?;
    let nnz: usize = fields[2]
        .parse()
        .map_err(|_| malformed(path, 1, "bad entry count"))?;

    let (_, offset_line) = lines
        .next()
        .ok_or_else(|| malformed(path, 2, "missing offset line"))?;
    let offset = offset_line
        .strip_prefix("offset ")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| malformed(path, 2, "expected `offset <decimal>`"))?;

    let mut q = Qubo::new(n, offset);
    let mut count = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 3 {
            return Err(malformed(path, line_no, "expected `<i> <j> <decimal>`"));
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|_| malformed(path, line_no, "bad row index"))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|_| malformed(path, line_no, "bad column index"))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| malformed(path, line_no, "bad coefficient"))?;
        if j < i {
            return Err(malformed(
                path,
                line_no,
                format!("lower-triangular entry ({i}, {j})"),
            ));
        }
        if j >= n {
            return Err(malformed(path, line_no, "index out of range"));
        }
        if q.get(i, j) != 0.0 {
            return Err(malformed(path, line_no, format!("duplicate entry ({i}, {j})")));
        }
        q.set(i, j, v);
        count += 1;
    }
    if count != nnz {
        return Err(malformed(
            path,
            1,
            format!("header promises {nnz} entries, found {count}"),
        ));
    }
    Ok(q)
}

pub fn import_qubo(path: &Path) -> Result<Qubo> {
    let text = std::fs::read_to_string(path)?;
    qubo_from_text(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qubo(rng: &mut ChaCha8Rng, n: usize) -> Qubo {
        let mut q = Qubo::new(n, rng.gen_range(-2.0..2.0));
        for i in 0..n {
            for j in i..n {
                if rng.gen_bool(0.7) {
                    q.set(i, j, rng.gen_range(-3.0..3.0));
                }
            }
        }
        q
    }

    #[test]
    fn single_diagonal_term_maps_to_half_field() {
        let mut q = Qubo::new(1, 0.5);
        q.set(0, 0, 3.0);
        let ising = to_ising(&q);
        assert_eq!(ising.fields[0], -1.5);
        // Two-point exactness is the contract.
        assert_eq!(ising.energy(&[1]).unwrap(), q.objective(&[false]).unwrap());
        assert_eq!(ising.energy(&[-1]).unwrap(), q.objective(&[true]).unwrap());
    }

    #[test]
    fn empty_qubo_keeps_offset() {
        let q = Qubo::new(0, 4.25);
        let ising = to_ising(&q);
        assert_eq!(ising.offset, 4.25);
        assert_eq!(ising.energy(&[]).unwrap(), 4.25);
    }

    #[test]
    fn ising_energy_matches_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=8);
            let q = random_qubo(&mut rng, n);
            let ising = to_ising(&q);
            for state in 0u32..(1 << n) {
                let x: Vec<bool> = (0..n).map(|i| state >> i & 1 == 1).collect();
                let z: Vec<i8> = x.iter().map(|&b| if b { -1 } else { 1 }).collect();
                let lhs = ising.energy(&z).unwrap();
                let rhs = q.objective(&x).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
                    "n={n} state={state}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn text_round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.gen_range(1..10);
            let q = random_qubo(&mut rng, n);
            let text = qubo_to_text(&q);
            let back = qubo_from_text(&text, "mem").unwrap();
            assert_eq!(q, back);
            assert_eq!(q.offset().to_bits(), back.offset().to_bits());
        }
    }

    #[test]
    fn lower_triangular_entry_is_rejected() {
        let text = "qubo 2 1\noffset 0.0e0\n1 0 1.0e0\n";
        let err = qubo_from_text(text, "mem").unwrap_err();
        match err {
            Error::MalformedFile { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entry_count_mismatch_is_rejected() {
        let text = "qubo 2 2\noffset 0.0e0\n0 1 1.0e0\n";
        assert!(matches!(
            qubo_from_text(text, "mem"),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn ising_text_has_header_and_fields() {
        let mut q = Qubo::new(2, 1.0);
        q.set(0, 0, -2.0);
        q.set(0, 1, 2.0);
        let text = ising_to_text(&to_ising(&q));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "ising 2 3");
        assert!(lines.next().unwrap().starts_with("offset "));
    }

    #[test]
    fn bit_strings_round_trip() {
        let x = vec![true, false, true, true];
        assert_eq!(bits_to_string(&x), "1011");
        assert_eq!(bits_from_str("1011").unwrap(), x);
        assert!(bits_from_str("10x1").is_err());
    }
}

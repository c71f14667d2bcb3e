//! Binary dump of an impedance matrix and a current vector.
//!
//! Layout, little-endian: magic `AMBZ`, version `u32`, `N: u32`, then `N²`
//! complex doubles (re, im) row-major, then `N` complex doubles.

use std::io::{self, Read, Write};

use num_complex::Complex64;

use super::linalg::CMatrix;

pub const DUMP_MAGIC: &[u8; 4] = b"AMBZ";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub matrix: CMatrix,
    pub currents: Vec<Complex64>,
}

pub fn write_dump<W: Write>(mut w: W, matrix: &CMatrix, currents: &[Complex64]) -> io::Result<()> {
    let n = matrix.rows();
    if matrix.cols() != n || currents.len() != n {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "dimension mismatch"));
    }
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    for z in matrix.as_slice().iter().chain(currents) {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> io::Result<MatrixDump> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != DUMP_VERSION {
        return Err(bad("unsupported version"));
    }
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut read_c = || -> io::Result<Complex64> {
        let mut b = [0u8; 16];
        r.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
        Ok(Complex64::new(re, im))
    };
    let data = (0..n * n).map(|_| read_c()).collect::<io::Result<Vec<_>>>()?;
    let currents = (0..n).map(|_| read_c()).collect::<io::Result<Vec<_>>>()?;
    Ok(MatrixDump {
        matrix: CMatrix::from_vec(n, n, data),
        currents,
    })
}

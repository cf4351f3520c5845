//! Portable float map reader/writer.
//!
//! Header `PF` (3 channels) or `Pf` (1 channel), then `W H`, then the scale
//! whose sign gives the byte order (negative = little endian). Scanlines are
//! stored bottom-up.

use hybrid_splat::{Error, Result};
use ndarray::Array3;

/// Encodes `H × W × C` (C = 1 or 3) as little-endian PFM.
pub fn encode(data: &Array3<f32>) -> Result<Vec<u8>> {
    let (h, w, c) = data.dim();
    let magic = match c {
        3 => "PF",
        1 => "Pf",
        _ => return Err(Error::invalid(format!("PFM holds 1 or 3 channels, got {c}"))),
    };
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(h * w * c * 4);
    for i in (0..h).rev() {
        for j in 0..w {
            for k in 0..c {
                out.extend_from_slice(&data[[i, j, k]].to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| std::str::from_utf8(&bytes[start..*pos]).ok()).flatten()
}

/// Decodes a PFM into `H × W × C`.
pub fn decode(bytes: &[u8]) -> Result<Array3<f32>> {
    let bad = |m: &str| Error::invalid(format!("malformed PFM: {m}"));
    let mut pos = 0;
    let c = match token(bytes, &mut pos) {
        Some("PF") => 3,
        Some("Pf") => 1,
        _ => return Err(bad("unknown magic")),
    };
    let mut num = |what: &str| token(bytes, &mut pos).ok_or_else(|| bad(what)).map(str::to_owned);
    let w: usize = num("width")?.parse().map_err(|_| bad("width"))?;
    let h: usize = num("height")?.parse().map_err(|_| bad("height"))?;
    let scale: f32 = num("scale")?.parse().map_err(|_| bad("scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be non-zero"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let need = h.checked_mul(w).and_then(|n| n.checked_mul(c * 4)).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() < pos || bytes.len() - pos != need {
        return Err(bad(&format!("expected {need} payload bytes, found {}", bytes.len().saturating_sub(pos))));
    }
    let little = scale < 0.0;
    let mut out = Array3::zeros((h, w, c));
    let mut chunks = bytes[pos..].chunks_exact(4);
    for i in (0..h).rev() {
        for j in 0..w {
            for k in 0..c {
                let b: [u8; 4] = chunks.next().expect("length checked").try_into().expect("chunk of 4");
                out[[i, j, k]] = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let a = Array3::from_shape_fn((3, 4, 3), |(i, j, k)| if (i + j + k) % 5 == 0 { f32::NAN } else { (i * 7 + j * 3 + k) as f32 * 0.37 - 2.0 });
        let b = decode(&encode(&a).unwrap()).unwrap();
        assert_eq!(a.dim(), b.dim());
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn bottom_up_layout() {
        let a = Array3::from_shape_fn((2, 1, 1), |(i, _, _)| i as f32);
        let bytes = encode(&a).unwrap();
        let body = &bytes[bytes.len() - 8..];
        assert_eq!(f32::from_le_bytes(body[..4].try_into().unwrap()), 1.0);
    }

    #[test]
    fn big_endian_accepted() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode(&bytes).unwrap()[[0, 0, 0]], 2.5);
    }

    #[test]
    fn truncated_rejected() {
        let a = Array3::<f32>::zeros((2, 2, 3));
        let bytes = encode(&a).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"P6\n1 1\n255\n").is_err());
    }
}

//! Binary PGM (P5) export for originals, counterfactuals, and signed
//! difference heat maps.

use anyhow::bail;

/// Encodes intensities in `[0, 1]` as a maxval-255 binary PGM.
pub fn encode_image(pixels: &[f64], side: usize) -> anyhow::Result<Vec<u8>> {
    if pixels.len() != side * side {
        bail!("{} pixels do not fill a {side}x{side} image", pixels.len());
    }
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(
        pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

/// Encodes a signed difference image: 0 maps to 128, ±1 map to 128 ± 127,
/// values beyond ±1 saturate.
pub fn encode_signed_diff(diff: &[f64], side: usize) -> anyhow::Result<Vec<u8>> {
    if diff.len() != side * side {
        bail!("{} pixels do not fill a {side}x{side} image", diff.len());
    }
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(
        diff.iter()
            .map(|&d| (128.0 + 127.0 * d.clamp(-1.0, 1.0)).round() as u8),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload_size() {
        let img = encode_image(&vec![0.5; 784], 28).unwrap();
        assert!(img.starts_with(b"P5\n28 28\n255\n"));
        assert_eq!(img.len(), b"P5\n28 28\n255\n".len() + 784);
    }

    #[test]
    fn zero_diff_is_uniform_128() {
        let img = encode_signed_diff(&vec![0.0; 16], 4).unwrap();
        let payload = &img[img.len() - 16..];
        assert!(payload.iter().all(|&b| b == 128));
    }

    #[test]
    fn diff_mapping_is_linear_and_saturating() {
        let img = encode_signed_diff(&[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 0.0, 0.0], 3).unwrap();
        let payload = &img[img.len() - 9..];
        assert_eq!(&payload[..7], &[1, 1, 65, 128, 192, 255, 255]);
    }

    #[test]
    fn wrong_size_is_rejected() {
        assert!(encode_image(&[0.0; 5], 2).is_err());
    }
}

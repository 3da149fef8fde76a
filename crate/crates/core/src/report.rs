//! Text rendering shared by every CSV writer.

/// A real at 12 significant digits in scientific notation, so that reruns
/// compare byte for byte.
pub fn real(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn reals(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| real(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(real(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(real(-2.5e10), "-2.50000000000e10");
        assert_eq!(real(0.0), "0.00000000000e0");
    }
}

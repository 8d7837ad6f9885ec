//! Unit conversions. Everything inside the crate is in atomic units
//! (hbar = e = m_e = 1); these helpers convert at the boundary.

/// One atomic unit of energy (Hartree) in cm^-1.
pub const HARTREE_CM1: f64 = 219_474.631_363_2;

/// One atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_26;

pub fn cm1_to_au(energy_cm1: f64) -> f64 {
    energy_cm1 / HARTREE_CM1
}

pub fn au_to_cm1(energy_au: f64) -> f64 {
    energy_au * HARTREE_CM1
}

pub fn fs_to_au(time_fs: f64) -> f64 {
    time_fs / AU_TIME_FS
}

pub fn au_to_fs(time_au: f64) -> f64 {
    time_au * AU_TIME_FS
}

/// Gaussian width `tau` of an envelope `exp(-t^2 / (2 tau^2))` with the given FWHM.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn paper_frequencies_in_au() {
        assert!((au_to_cm1(cm1_to_au(16956.0)) - 16956.0).abs() < 1e-9);
        assert!((cm1_to_au(HARTREE_CM1) - 1.0).abs() < 1e-15);
        assert!((fs_to_au(AU_TIME_FS) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fwhm_of_sigma() {
        let sigma = fwhm_to_sigma(2.0);
        // exp(-1^2 / (2 sigma^2)) = 1/2 at half the FWHM
        assert!(((-1.0 / (2.0 * sigma * sigma)).exp() - 0.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn energy_round_trip(e in -1.0e6f64..1.0e6) {
            let back = au_to_cm1(cm1_to_au(e));
            prop_assert!((back - e).abs() <= 1e-12 * e.abs().max(1.0));
        }

        #[test]
        fn time_round_trip(t in 0.0f64..1.0e5) {
            let back = au_to_fs(fs_to_au(t));
            prop_assert!((back - t).abs() <= 1e-12 * t.abs().max(1.0));
        }
    }
}

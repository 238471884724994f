//! Front half of the receive chain: conversion, mixing, composed
//! bandpass/matched filtering by overlap-add, and FSK demodulation.

mod demod;
mod fir;
mod ola;
mod plan;
mod signal;

pub use demod::{
    demodulate, demodulate_baseband, demodulate_window, demodulate_window_into, Demodulated,
    Demodulator, FrontendConfig,
};
pub use fir::{compose, design_bandpass, matched_filters, FirFilter};
pub use ola::{block_transform_len, overlap_add_bank, overlap_add_filter, ConvMode};
pub use plan::{BufferRole, CacheStats, Direction, PlanCache};
pub use signal::{convert, mix, mix_in_place, RawSampleBlock};

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn pad_length(n: usize) -> usize {
    assert!(n >= 1, "pad_length of zero");
    (n..).find(|&m| is_smooth(m)).expect("smooth numbers are unbounded")
}

fn is_smooth(mut m: usize) -> bool {
    for p in [2, 3, 5, 7] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pad_length_examples() {
        assert_eq!(pad_length(1000), 1000);
        assert_eq!(pad_length(101), 105);
        assert_eq!(pad_length(1), 1);
        assert_eq!(pad_length(11), 12);
    }

    #[test]
    fn pad_length_matches_enumeration_up_to_a_million() {
        // Enumerate every {2,3,5,7}-smooth number directly and walk them in order.
        const LIMIT: u64 = 2_000_000;
        let mut smooth = Vec::new();
        let mut a = 1u64;
        while a <= LIMIT {
            let mut b = a;
            while b <= LIMIT {
                let mut c = b;
                while c <= LIMIT {
                    let mut d = c;
                    while d <= LIMIT {
                        smooth.push(d as usize);
                        d *= 7;
                    }
                    c *= 5;
                }
                b *= 3;
            }
            a *= 2;
        }
        smooth.sort_unstable();
        let mut next = 0;
        for n in 1..=1_000_000usize {
            while smooth[next] < n {
                next += 1;
            }
            assert_eq!(pad_length(n), smooth[next], "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn pad_length_is_smooth_and_not_smaller(n in 1usize..5_000_000) {
            let m = pad_length(n);
            prop_assert!(m >= n);
            prop_assert!(is_smooth(m));
        }
    }
}

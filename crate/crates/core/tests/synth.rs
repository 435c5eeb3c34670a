use psdnorm::spectral::{welch_psd, WelchConfig, WindowKind};
use psdnorm::synth::{
    base_psd, make_shifted_domains, sample_gaussian_with_psd, BasePreset, CorpusParams, DomainSpec,
};
use psdnorm::Psd;

const SEEDS: u64 = 20;
const LENGTH: usize = 1 << 16;

fn mean_welch(psd: &Psd, welch: &WelchConfig) -> Psd {
    let estimates: Vec<Psd> = (0..SEEDS)
        .map(|s| {
            let spec = DomainSpec::new(psd.clone(), 1, LENGTH, 1000 + s).unwrap();
            welch_psd(&sample_gaussian_with_psd(&spec)[0], welch).unwrap()
        })
        .collect();
    Psd::arithmetic_mean(&estimates).unwrap()
}

#[test]
fn white_noise_is_flat() {
    let flat = Psd::ones(2, 8).unwrap();
    let est = mean_welch(&flat, &WelchConfig::with_filter_size(8).unwrap());
    for v in est.values() {
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }
}

#[test]
fn smooth_spectra_are_reproduced() {
    // (bins, tilt strength, window): log-power changes slowly from bin to bin
    let cases = [
        (8, 0.25, WindowKind::Hann),
        (16, 0.25, WindowKind::Hann),
        (16, 0.5, WindowKind::Hann),
        (16, 0.25, WindowKind::Boxcar),
    ];
    let params = CorpusParams {
        n_signals: 1,
        length: LENGTH,
        seed: 0,
    };
    for (f, strength, window) in cases {
        let domains =
            make_shifted_domains(&Psd::ones(2, f).unwrap(), 3, strength, &params).unwrap();
        let welch = WelchConfig::new(f, f / 2, window).unwrap();
        for d in &domains {
            let est = mean_welch(d.psd(), &welch);
            for (e, p) in est.values().iter().zip(d.psd().values()) {
                assert!(
                    ((e - p) / p).abs() < 0.05,
                    "f={f} s={strength} {window}: {e} vs {p}"
                );
            }
        }
    }
}

#[test]
fn dominant_bin_sets_peak_and_periodicity() {
    // quarter-rate peak: bins 2 and 6 of 8
    let psd = Psd::from_rows(&[vec![1.0, 1.0, 4.0, 1.0, 1.0, 1.0, 4.0, 1.0]]).unwrap();
    // a fine Welch grid resolves the interpolated spectrum at the coarse bins
    let fine = WelchConfig::new(128, 64, WindowKind::Hann).unwrap();
    let est = mean_welch(&psd, &fine);
    let ratio = est.get(0, 32) / est.get(0, 0);
    assert!((ratio / 4.0 - 1.0).abs() < 0.1, "peak ratio {ratio}");
    let peak = (0..=64)
        .max_by(|&a, &b| est.get(0, a).total_cmp(&est.get(0, b)))
        .unwrap();
    assert_eq!(peak, 32);

    let x = &sample_gaussian_with_psd(&DomainSpec::new(psd, 1, LENGTH, 5).unwrap())[0];
    let row = x.row(0);
    let acf = |lag: usize| {
        (0..LENGTH)
            .map(|n| row[n] * row[(n + lag) % LENGTH])
            .sum::<f64>()
            / LENGTH as f64
    };
    let (a1, a2, a4) = (acf(1), acf(2), acf(4));
    assert!(a2 < -0.1 && a4 > 0.1, "acf(2) = {a2}, acf(4) = {a4}");
    assert!(a4 > a1.abs());
}

#[test]
fn pink_base_keeps_unit_mean_power() {
    let p = base_psd(BasePreset::Pink, 1, 8).unwrap();
    let est = mean_welch(&p, &WelchConfig::with_filter_size(8).unwrap());
    let total: f64 = est.values().sum();
    assert!((total / 8.0 - 1.0).abs() < 0.05);
}

use hawkes_renewal::estimators::{
    binomial_se, ks_exponential, ks_two_sample, lag1_correlation, lln_estimate, poisson_gof,
};
use hawkes_renewal::renewal::first_offsets;
use hawkes_renewal::{sample_windows, Kernel};

const N: usize = 100_000;

#[test]
fn canceling_windows_hold_single_jumps() {
    let k = Kernel::canceling(2.0, 1.0).unwrap();
    let s = sample_windows(&k, 2.0, N, 21).unwrap();
    assert!(s.counts().iter().all(|&w| w == 1));
    let excess: Vec<f64> = s.taus().iter().map(|t| t - 1.0).collect();
    assert!(ks_exponential(&excess, 2.0).unwrap().pass);

    let est = lln_estimate(&s).unwrap();
    assert!(
        (est.m_hat - 2.0 / 3.0).abs() <= 3.0 * est.se_m_hat,
        "{est:?}"
    );
    assert!((est.sigma2_hat - 2.0 / 27.0).abs() <= 0.15 * 2.0 / 27.0);
}

#[test]
fn delayed_windows_follow_their_laws() {
    let k = Kernel::delayed_canceling(1.0, 0.5, 1.0).unwrap();
    let s = sample_windows(&k, 1.0, N, 22).unwrap();
    let extra: Vec<u64> = s.counts().iter().map(|&w| w as u64 - 1).collect();
    let gof = poisson_gof(&extra, 0.5).unwrap();
    assert!(gof.pass, "{gof:?}");

    let est = lln_estimate(&s).unwrap();
    assert!(
        (est.m_hat - 0.575_478).abs() <= 3.0 * est.se_m_hat,
        "{est:?}"
    );

    let atom = extra.iter().filter(|&&e| e == 0).count() as f64 / N as f64;
    let p = (-0.5f64).exp();
    assert!((atom - p).abs() <= 3.0 * binomial_se(p, N), "atom {atom}");
}

#[test]
fn windows_regenerate() {
    let k = Kernel::new([(0.0, 1.0, 0.5), (1.0, 2.0, -3.0)]).unwrap();
    let s = sample_windows(&k, 1.0, N, 23).unwrap();
    let offsets = first_offsets(&s).unwrap();
    assert!(ks_exponential(&offsets, 1.0).unwrap().pass);

    let band = 3.0 / (N as f64).sqrt();
    let taus = s.taus();
    let ws: Vec<f64> = s.counts().iter().map(|&w| w as f64).collect();
    assert!(lag1_correlation(&taus).abs() <= band);
    assert!(lag1_correlation(&ws).abs() <= band);
    let (a, b) = taus.split_at(N / 2);
    assert!(ks_two_sample(a, b).unwrap().pass);
}

#[test]
fn pure_inhibition_counts_have_geometric_tails() {
    let lambda = 1.0;
    let k = Kernel::new([(0.0, 1.0, -0.5)]).unwrap();
    let s = sample_windows(&k, lambda, N, 24).unwrap();
    let q = 1.0 - (-lambda * k.support()).exp();
    let counts = s.counts();
    for j in 0..=20 {
        let tail = counts.iter().filter(|&&w| w > j).count() as f64 / N as f64;
        let bound = q.powi(j as i32);
        assert!(
            tail <= bound + 3.0 * binomial_se(tail, N),
            "k={j}: {tail} > {bound}"
        );
    }
}

#[test]
fn reconstruction_is_exact() {
    let k = Kernel::new([(0.0, 0.5, 0.6), (0.5, 1.5, -1.0)]).unwrap();
    let s = sample_windows(&k, 1.3, 5_000, 25).unwrap();
    let rebuilt = s.reconstruct();
    let stream = hawkes_renewal::simulate(
        &k,
        &hawkes_renewal::SimConfig::new(1.3, rebuilt.last().copied().unwrap_or(1.0)).seed(25),
    )
    .unwrap();
    assert_eq!(&stream.times()[..rebuilt.len()], &rebuilt[..]);
}

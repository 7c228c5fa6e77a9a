use collapsim::collapse::{measure_phonon, ScreenSampler};
use collapsim::hilbert::{gaussian_packet, sector_weights, FockRegister, GridSpec, JointState};
use collapsim::observables::{histogram, Histogram};
use collapsim::rng::RngStream;
use num_complex::Complex64;

fn entangled() -> JointState {
    let g = GridSpec::new(256, -20.0, 20.0).unwrap();
    let fock = FockRegister::new(2).unwrap();
    let a = gaussian_packet(&g, -5.0, 1.0, 1.0).unwrap();
    let b = gaussian_packet(&g, 0.0, 2.0, -1.0).unwrap();
    let c = gaussian_packet(&g, 6.0, 1.5, 0.0).unwrap();
    JointState::from_branches(
        g,
        fock,
        &[
            (0, Complex64::new(0.7, 0.0), &a),
            (0, Complex64::new(0.0, 0.3), &b),
            (1, Complex64::new(0.5, 0.0), &b),
            (2, Complex64::new(0.2, 0.2), &c),
        ],
    )
    .unwrap()
    .normalized()
    .unwrap()
}

#[test]
fn outcome_frequencies_follow_sector_weights() {
    let state = entangled();
    let weights = sector_weights(&state);
    let n = 10_000;
    let mut counts = [0usize; 3];
    for k in 0..n {
        let (outcome, _) = measure_phonon(&state, &mut RngStream::split(11, k)).unwrap();
        counts[outcome] += 1;
    }
    for (c, w) in counts.iter().zip(&weights) {
        let sigma = (n as f64 * w * (1.0 - w)).sqrt();
        assert!(
            (*c as f64 - n as f64 * w).abs() <= 3.0 * sigma,
            "{counts:?} vs {weights:?}"
        );
    }
}

#[test]
fn nonselective_measurement_leaves_screen_density() {
    // Averaging the post-measurement densities over outcomes must give back
    // the unmeasured density: the phonon readout cannot signal to the screen.
    let state = entangled();
    let before = state.position_density();
    let n = 4000;
    let mut after = vec![0.0; before.len()];
    for k in 0..n {
        let (_, post) = measure_phonon(&state, &mut RngStream::split(5, k)).unwrap();
        for (a, d) in after.iter_mut().zip(post.position_density()) {
            *a += d / n as f64;
        }
    }
    let dx = state.grid().dx();
    let l1: f64 = before
        .iter()
        .zip(&after)
        .map(|(b, a)| (b - a).abs() * dx)
        .sum();
    // Three outcomes at these sample sizes: L1 error of order 1/√n.
    assert!(l1 < 4.0 / (n as f64).sqrt(), "L1 = {l1}");

    let total: f64 = after.iter().sum::<f64>() * dx;
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn screen_histogram_is_multinomial() {
    let state = entangled();
    let sampler = ScreenSampler::new(&state).unwrap();
    let mut rng = RngStream::new(2024);
    let n = 20_000;
    let draws: Vec<(f64, usize)> = (0..n).map(|_| sampler.sample(&mut rng)).collect();

    // Sector marginal.
    let weights = sector_weights(&state);
    for (s, w) in weights.iter().enumerate() {
        let c = draws.iter().filter(|d| d.1 == s).count() as f64;
        let sigma = (n as f64 * w * (1.0 - w)).sqrt();
        assert!((c - n as f64 * w).abs() <= 4.0 * sigma);
    }

    // Position marginal: Pearson χ² over coarse bins against the Born law.
    let grid = state.grid();
    let edges = Histogram::uniform_edges(-12.0, 12.0, 24);
    let xs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let h = histogram(&xs, &edges).unwrap();
    let density = state.position_density();
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (b, &count) in h.counts.iter().enumerate() {
        let p: f64 = (0..grid.n_points())
            .filter(|&i| grid.x(i) >= edges[b] && grid.x(i) < edges[b + 1])
            .map(|i| density[i] * grid.dx())
            .sum();
        let expected = p * n as f64;
        if expected >= 5.0 {
            chi2 += (count as f64 - expected).powi(2) / expected;
            dof += 1;
        }
    }
    // Generous bound: mean dof, sd √(2·dof).
    let dof = dof as f64 - 1.0;
    assert!(
        chi2 < dof + 5.0 * (2.0 * dof).sqrt(),
        "χ² = {chi2} over {dof} dof"
    );
}

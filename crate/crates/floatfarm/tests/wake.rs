use floatfarm::wake::{upwind_step, DelayLine, WakeColumn, WakeParams};

fn gaussian(x: f64, c: f64, s: f64) -> f64 {
    (-(x - c).powi(2) / (2.0 * s * s)).exp()
}

/// L2 error after translating a Gaussian at constant speed with no decay.
fn translation_error(dx: f64) -> f64 {
    let (u, t_end, c0, sigma, len) = (10.0, 20.0, 300.0, 60.0, 1000.0);
    let n = (len / dx) as usize + 1;
    let mut d: Vec<f64> = (0..n).map(|i| gaussian(i as f64 * dx, c0, sigma)).collect();
    let decay = vec![0.0; n];
    let dt = 0.5 * dx / u;
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        upwind_step(&mut d, u, &decay, None, dt, dx).unwrap();
    }
    let t = steps as f64 * dt;
    let sq: f64 = d
        .iter()
        .enumerate()
        .map(|(i, v)| (v - gaussian(i as f64 * dx, c0 + u * t, sigma)).powi(2))
        .sum();
    (sq * dx).sqrt()
}

#[test]
fn gaussian_translation_converges_first_order() {
    let errs: Vec<f64> = [4.0, 2.0, 1.0, 0.5].iter().map(|&dx| translation_error(dx)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn wake_arrival_agrees_between_models() {
    // step in upstream thrust at matched advection speed, compare mean delays
    let (u, kappa, dt) = (10.0, 882.0, 0.1);
    let params = WakeParams {
        k_w: 0.0,
        ..WakeParams::default()
    };
    let mut col = WakeColumn::new(&[0.0, kappa], 63.0, &params).unwrap();
    let mut line = DelayLine::new(kappa, u).unwrap();
    let horizon = 4.0 * kappa / u;
    let n = (horizon / dt) as usize;
    let (mut pde, mut pade) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        col.step(&[u, u], &[0.75, 0.0], dt).unwrap();
        pde.push(col.deficit_at(0, kappa));
        pade.push(line.step(1.0, dt).unwrap());
    }
    let mean_delay = |y: &[f64]| {
        let fin = *y.last().unwrap();
        // first moment of the impulse response = integral of (1 - normalized step)
        y.iter().map(|v| (1.0 - v / fin) * dt).sum::<f64>()
    };
    let (a, b) = (mean_delay(&pde), mean_delay(&pade));
    assert!((a - b).abs() / b < 0.3, "pde {a}, delay line {b}");
}

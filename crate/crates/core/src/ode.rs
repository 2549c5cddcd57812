//! Adaptive embedded Runge-Kutta 5(4) (Cash-Karp pair) over statically sized
//! states, with exact landing on caller-requested checkpoint times.
//!
//! The driver owns only step-size control; recording, conservative-quantity
//! monitoring and manifold projection live in the caller's accept hook, which
//! may mutate the state (the next step starts from the mutated value).

use crate::error::{Error, Result};
use nalgebra::SVector;

pub type State<const N: usize> = SVector<f64, N>;

// Cash-Karp embedded pair, orders 5 and 4.
const A: [[f64; 5]; 5] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
    pub max_steps: u64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 0.25,
            h_init: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationStats {
    pub accepted: u64,
    pub rejected: u64,
}

struct Attempt<const N: usize> {
    y: State<N>,
    err_norm: f64,
}

fn try_step<const N: usize>(
    f: &mut dyn FnMut(&State<N>) -> Result<State<N>>,
    y: &State<N>,
    k1: &State<N>,
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<Attempt<N>> {
    let mut k = [State::<N>::zeros(); 6];
    k[0] = *k1;
    for s in 1..6 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s - 1][j];
            if a != 0.0 {
                ys += kj * (a * h);
            }
        }
        k[s] = f(&ys)?;
    }
    let mut y5 = *y;
    let mut err = State::<N>::zeros();
    for (j, kj) in k.iter().enumerate() {
        y5 += kj * (B5[j] * h);
        err += kj * ((B5[j] - B4[j]) * h);
    }
    let mut acc = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].abs().max(y5[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    Ok(Attempt { y: y5, err_norm: (acc / N as f64).sqrt() })
}

/// Integrates y' = f(y) from t0 to t_end (t_end > t0), calling `on_accept`
/// after every accepted step. `stops` must be strictly increasing times in
/// (t0, t_end]; steps land on each exactly (bitwise), after which integration
/// continues from the possibly mutated state.
pub fn integrate<const N: usize>(
    mut f: impl FnMut(&State<N>) -> Result<State<N>>,
    t0: f64,
    y0: State<N>,
    t_end: f64,
    stops: &[f64],
    opts: &StepOptions,
    mut on_accept: impl FnMut(f64, &mut State<N>) -> Result<()>,
) -> Result<(State<N>, IntegrationStats)> {
    if !(t_end > t0) {
        return Err(Error::Precondition(format!(
            "integration horizon must advance time ({t0} -> {t_end})"
        )));
    }
    debug_assert!(stops.windows(2).all(|w| w[0] < w[1]));

    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(&y)?;

    // Starting step from scaled state/derivative magnitudes.
    let mut h = opts.h_init.unwrap_or_else(|| {
        let d0 = y.amax().max(1e-8);
        let d1 = k1.amax().max(1e-8);
        (0.01 * d0 / d1).clamp(1e-8, opts.h_max)
    });

    let mut stop_idx = stops.partition_point(|&s| s <= t0);
    let mut stage_failures = 0u32;

    loop {
        if t >= t_end {
            return Ok((y, stats));
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                detail: format!("step budget {} exhausted", opts.max_steps),
            });
        }
        let next_stop = stops.get(stop_idx).copied().unwrap_or(t_end).min(t_end);
        let target = if next_stop > t { next_stop } else { t_end };
        let mut clamped = false;
        let mut h_eff = h.min(opts.h_max);
        if t + h_eff >= target {
            h_eff = target - t;
            clamped = true;
        }
        if h_eff <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                detail: format!("step size underflow (h = {h_eff:.3e})"),
            });
        }

        match try_step(&mut f, &y, &k1, h_eff, opts.rtol, opts.atol) {
            Ok(attempt) if attempt.err_norm <= 1.0 => {
                stage_failures = 0;
                t = if clamped { target } else { t + h_eff };
                y = attempt.y;
                on_accept(t, &mut y)?;
                k1 = f(&y)?;
                stats.accepted += 1;
                if clamped && target == next_stop {
                    stop_idx += 1;
                }
                let factor = if attempt.err_norm > 0.0 {
                    (0.9 * attempt.err_norm.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    5.0
                };
                h = (h_eff * factor).min(opts.h_max);
            }
            Ok(attempt) => {
                stats.rejected += 1;
                let factor = (0.9 * attempt.err_norm.powf(-0.2)).clamp(0.2, 0.9);
                h = h_eff * factor;
            }
            Err(_) if stage_failures < 60 => {
                // A stage left the field's domain; resolve by shrinking.
                stage_failures += 1;
                stats.rejected += 1;
                h = h_eff * 0.25;
            }
            Err(e) => {
                return Err(Error::Integration {
                    t,
                    detail: format!("field evaluation kept failing: {e}"),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SVector;

    #[test]
    fn exponential_growth_is_accurate() {
        let opts = StepOptions::default();
        let (y, _) = integrate::<1>(
            |y| Ok(*y),
            0.0,
            SVector::<f64, 1>::new(1.0),
            1.0,
            &[],
            &opts,
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let opts = StepOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let y0 = SVector::<f64, 2>::new(1.0, 0.0);
        let (y, stats) = integrate::<2>(
            |y| Ok(SVector::<f64, 2>::new(y[1], -y[0])),
            0.0,
            y0,
            100.0,
            &[],
            &opts,
            |_, _| Ok(()),
        )
        .unwrap();
        let energy = y.norm_squared();
        assert!((energy - 1.0).abs() < 1e-8, "energy drift {}", energy - 1.0);
        assert!(stats.accepted > 100);
    }

    #[test]
    fn stops_are_hit_bitwise_exactly() {
        let stops = [0.1, 0.25, std::f64::consts::FRAC_PI_4, 0.9];
        let mut seen = Vec::new();
        let opts = StepOptions::default();
        integrate::<1>(
            |_| Ok(SVector::<f64, 1>::new(1.0)),
            0.0,
            SVector::<f64, 1>::zeros(),
            1.0,
            &stops,
            &opts,
            |t, _| {
                seen.push(t);
                Ok(())
            },
        )
        .unwrap();
        for s in stops {
            assert!(seen.iter().any(|&t| t == s), "missing stop {s}");
        }
        assert_eq!(*seen.last().unwrap(), 1.0);
    }

    #[test]
    fn accept_hook_mutations_feed_the_next_step() {
        // Freeze the state at every step; the result stays at the frozen value.
        let opts = StepOptions::default();
        let (y, _) = integrate::<1>(
            |y| Ok(*y),
            0.0,
            SVector::<f64, 1>::new(1.0),
            1.0,
            &[],
            &opts,
            |_, y| {
                y[0] = 1.0;
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(y[0], 1.0);
    }

    #[test]
    fn backward_time_request_is_rejected() {
        let opts = StepOptions::default();
        let r = integrate::<1>(
            |y| Ok(*y),
            1.0,
            SVector::<f64, 1>::new(1.0),
            0.0,
            &[],
            &opts,
            |_, _| Ok(()),
        );
        assert!(r.is_err());
    }
}

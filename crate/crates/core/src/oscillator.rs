//! Duffing oscillator excitation and response generation.
//!
//! The forcing is Gaussian white noise passed through a causal Butterworth
//! low-pass (bilinear transform with frequency pre-warping, realised as a
//! cascade of second-order sections). The displacement response of
//!
//! ```text
//! m·y'' + c·y' + k·y + k3·y³ = x(t)
//! ```
//!
//! is integrated with classical fourth-order Runge-Kutta at the sampling
//! interval. Half-step forcing values come from four-point cubic
//! interpolation of the samples so the scheme keeps fourth-order accuracy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{NarxError, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// kg
    pub mass: f64,
    /// N·s/m
    pub damping: f64,
    /// N/m
    pub stiffness: f64,
    /// N/m³
    pub cubic_stiffness: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 20.0,
            stiffness: 1e4,
            cubic_stiffness: 5e9,
        }
    }
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(NarxError::config("oscillator.mass", "must be > 0"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(NarxError::config("oscillator.damping", "must be >= 0"));
        }
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0) {
            return Err(NarxError::config("oscillator.stiffness", "must be >= 0"));
        }
        if !self.cubic_stiffness.is_finite() {
            return Err(NarxError::config(
                "oscillator.cubic_stiffness",
                "must be finite",
            ));
        }
        Ok(())
    }

    /// ½mẏ² + ½ky² + ¼k₃y⁴
    pub fn energy(&self, y: f64, ydot: f64) -> f64 {
        0.5 * self.mass * ydot * ydot
            + 0.5 * self.stiffness * y * y
            + 0.25 * self.cubic_stiffness * y.powi(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    /// Standard deviation of the white-noise forcing, N.
    pub noise_scale: f64,
    pub cutoff_hz: f64,
    pub filter_order: usize,
    pub sample_rate_hz: f64,
    pub total_samples: usize,
    pub rng_seed: u64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self {
            noise_scale: 10.0,
            cutoff_hz: 50.0,
            filter_order: 4,
            sample_rate_hz: 500.0,
            total_samples: 14_000,
            rng_seed: 0,
        }
    }
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(NarxError::config("excitation.noise_scale", "must be >= 0"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(NarxError::config(
                "excitation.sample_rate_hz",
                "must be > 0",
            ));
        }
        check_cutoff(self.cutoff_hz, self.sample_rate_hz, "excitation.cutoff_hz")?;
        if self.filter_order == 0 {
            return Err(NarxError::config("excitation.filter_order", "must be >= 1"));
        }
        if self.total_samples == 0 {
            return Err(NarxError::config("excitation.total_samples", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub discard_samples: usize,
    pub keep_samples: usize,
    /// m
    pub initial_displacement: f64,
    /// m/s
    pub initial_velocity: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            discard_samples: 10_000,
            keep_samples: 4_000,
            initial_displacement: 0.0,
            initial_velocity: 0.0,
        }
    }
}

fn check_cutoff(cutoff_hz: f64, sample_rate_hz: f64, field: &str) -> Result<()> {
    let nyquist = sample_rate_hz / 2.0;
    if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(NarxError::config(
            field,
            format!("cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"),
        ));
    }
    Ok(())
}

/// Unfiltered i.i.d. N(0, noise_scale²) draws.
pub fn white_noise(noise_scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if noise_scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let normal = Normal::new(0.0, noise_scale)
        .map_err(|e| NarxError::config("noise_scale", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

pub fn generate_excitation(spec: &ExcitationSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let dt = 1.0 / spec.sample_rate_hz;
    let raw = TimeSeries::new(
        dt,
        white_noise(spec.noise_scale, spec.total_samples, spec.rng_seed)?,
    )?;
    butterworth_lowpass(&raw, spec.cutoff_hz, spec.filter_order)
}

/// One second-order section, transposed direct form II, a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        let (mut s0, mut s1) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + s0;
            s0 = self.b[1] * input - self.a[0] * out + s1;
            s1 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }

    /// Complex frequency response at normalised angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> (f64, f64) {
        // z^-1 = e^{-iω}
        let (c1, s1) = (omega.cos(), -omega.sin());
        let (c2, s2) = ((2.0 * omega).cos(), -(2.0 * omega).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }
}

/// Second-order sections of a digital Butterworth low-pass with unit DC gain.
///
/// Odd orders end with a first-order section stored as a biquad with
/// `b[2] = a[1] = 0`.
pub fn butterworth_sections(cutoff_hz: f64, sample_rate_hz: f64, order: usize) -> Result<Vec<Biquad>> {
    check_cutoff(cutoff_hz, sample_rate_hz, "cutoff_hz")?;
    if order == 0 {
        return Err(NarxError::config("order", "must be >= 1"));
    }
    let fs2 = 2.0 * sample_rate_hz;
    let warped = fs2 * (PI * cutoff_hz / sample_rate_hz).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        // Upper-half-plane member of each conjugate pole pair of the prototype.
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let (sr, si) = (warped * theta.cos(), warped * theta.sin());
        // z = (2fs + s) / (2fs - s)
        let (nr, ni) = (fs2 + sr, si);
        let (dr, di) = (fs2 - sr, -si);
        let d = dr * dr + di * di;
        let (zr, zi) = ((nr * dr + ni * di) / d, (ni * dr - nr * di) / d);
        let a1 = -2.0 * zr;
        let a2 = zr * zr + zi * zi;
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad {
            b: [g, 2.0 * g, g],
            a: [a1, a2],
        });
    }
    if order % 2 == 1 {
        let z = (fs2 - warped) / (fs2 + warped);
        let g = (1.0 - z) / 2.0;
        sections.push(Biquad {
            b: [g, g, 0.0],
            a: [-z, 0.0],
        });
    }
    Ok(sections)
}

/// Causal Butterworth low-pass filtering; output has the input's length.
pub fn butterworth_lowpass(x: &TimeSeries, cutoff_hz: f64, order: usize) -> Result<TimeSeries> {
    let sections = butterworth_sections(cutoff_hz, x.sample_rate(), order)?;
    let mut out = x.values().to_vec();
    for s in &sections {
        s.run(&mut out);
    }
    x.with_values(out)
}

/// ÿ from the equation of motion.
#[inline]
pub fn duffing_acceleration(params: &OscillatorParams, y: f64, ydot: f64, x: f64) -> f64 {
    (x - params.damping * ydot - params.stiffness * y - params.cubic_stiffness * y * y * y)
        / params.mass
}

#[inline]
fn rk4_step(
    params: &OscillatorParams,
    (y, v): (f64, f64),
    forcing: [f64; 3],
    dt: f64,
) -> (f64, f64) {
    let [f0, fmid, f1] = forcing;
    let k1y = v;
    let k1v = duffing_acceleration(params, y, v, f0);
    let k2y = v + 0.5 * dt * k1v;
    let k2v = duffing_acceleration(params, y + 0.5 * dt * k1y, k2y, fmid);
    let k3y = v + 0.5 * dt * k2v;
    let k3v = duffing_acceleration(params, y + 0.5 * dt * k2y, k3y, fmid);
    let k4y = v + dt * k3v;
    let k4v = duffing_acceleration(params, y + dt * k3y, k4y, f1);
    (
        y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Cubic interpolation of the forcing at the midpoint of interval `[i, i+1]`.
fn midpoint(x: &[f64], i: usize) -> f64 {
    let n = x.len();
    if n < 4 {
        return 0.5 * (x[i] + x[i + 1]);
    }
    if i == 0 {
        (5.0 * x[0] + 15.0 * x[1] - 5.0 * x[2] + x[3]) / 16.0
    } else if i + 2 >= n {
        (x[n - 4] - 5.0 * x[n - 3] + 15.0 * x[n - 2] + 5.0 * x[n - 1]) / 16.0
    } else {
        (-x[i - 1] + 9.0 * x[i] + 9.0 * x[i + 1] - x[i + 2]) / 16.0
    }
}

/// Displacement and velocity at every sample of `forcing`, starting from the
/// given initial state at sample 0.
pub fn integrate_sampled(
    params: &OscillatorParams,
    forcing: &TimeSeries,
    initial: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let x = forcing.values();
    let dt = forcing.dt();
    let mut ys = Vec::with_capacity(x.len());
    let mut vs = Vec::with_capacity(x.len());
    let mut state = initial;
    ys.push(state.0);
    vs.push(state.1);
    for i in 0..x.len() - 1 {
        state = rk4_step(params, state, [x[i], midpoint(x, i), x[i + 1]], dt);
        if !(state.0.is_finite() && state.1.is_finite()) {
            return Err(NarxError::Divergence {
                stage: "rk4 integration".into(),
                step: i + 1,
            });
        }
        ys.push(state.0);
        vs.push(state.1);
    }
    Ok((ys, vs))
}

/// Integrate with a continuous forcing function, returning `n_steps + 1`
/// displacement samples.
pub fn integrate_with<F: Fn(f64) -> f64>(
    params: &OscillatorParams,
    forcing: F,
    dt: f64,
    n_steps: usize,
    initial: (f64, f64),
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut state = initial;
    ys.push(state.0);
    for i in 0..n_steps {
        let t = i as f64 * dt;
        state = rk4_step(
            params,
            state,
            [forcing(t), forcing(t + 0.5 * dt), forcing(t + dt)],
            dt,
        );
        if !(state.0.is_finite() && state.1.is_finite()) {
            return Err(NarxError::Divergence {
                stage: "rk4 integration".into(),
                step: i + 1,
            });
        }
        ys.push(state.0);
    }
    Ok(ys)
}

/// Integrate the full excitation and return the final `keep_samples` of
/// forcing and displacement, aligned sample-for-sample.
pub fn simulate(
    params: &OscillatorParams,
    excitation: &TimeSeries,
    sim: &SimulationSpec,
) -> Result<(TimeSeries, TimeSeries)> {
    let needed = sim.discard_samples + sim.keep_samples;
    if sim.keep_samples == 0 {
        return Err(NarxError::config("simulation.keep_samples", "must be >= 1"));
    }
    if excitation.len() < needed {
        return Err(NarxError::config(
            "excitation.total_samples",
            format!(
                "excitation has {} samples, need at least {needed} (discard {} + keep {})",
                excitation.len(),
                sim.discard_samples,
                sim.keep_samples
            ),
        ));
    }
    let (ys, _) = integrate_sampled(
        params,
        excitation,
        (sim.initial_displacement, sim.initial_velocity),
    )?;
    let start = excitation.len() - sim.keep_samples;
    let x = excitation.with_values(excitation.values()[start..].to_vec())?;
    let y = excitation.with_values(ys[start..].to_vec())?;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_params_match_reference_values() {
        let p = OscillatorParams::default();
        assert_eq!((p.mass, p.damping, p.stiffness, p.cubic_stiffness), (1.0, 20.0, 1e4, 5e9));
        let e = ExcitationSpec::default();
        assert_eq!((e.noise_scale, e.cutoff_hz, e.sample_rate_hz), (10.0, 50.0, 500.0));
        let s = SimulationSpec::default();
        assert_eq!((s.discard_samples, s.keep_samples), (10_000, 4_000));
    }

    #[test]
    fn acceleration_by_substitution() {
        let p = OscillatorParams::default();
        assert_eq!(duffing_acceleration(&p, 0.0, 0.0, 0.0), 0.0);
        assert_relative_eq!(duffing_acceleration(&p, 1e-3, 0.0, 0.0), -15.0, max_relative = 1e-12);
        assert_eq!(duffing_acceleration(&p, 0.0, 1.0, 20.0), 0.0);
    }

    #[test]
    fn zero_scale_excitation_is_zero() {
        let spec = ExcitationSpec {
            noise_scale: 0.0,
            total_samples: 500,
            ..Default::default()
        };
        let x = generate_excitation(&spec).unwrap();
        assert_eq!(x.len(), 500);
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn excitation_is_deterministic() {
        let spec = ExcitationSpec {
            total_samples: 2000,
            rng_seed: 17,
            ..Default::default()
        };
        let a = generate_excitation(&spec).unwrap();
        let b = generate_excitation(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_excitation(&ExcitationSpec { rng_seed: 18, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn white_noise_scale_law() {
        let draws = white_noise(10.0, 100_000, 3).unwrap();
        let sd = crate::series::variance(&draws).sqrt();
        assert!((sd - 10.0).abs() / 10.0 < 0.01, "sd = {sd}");
    }

    #[test]
    fn invalid_excitation_names_field() {
        let spec = ExcitationSpec {
            cutoff_hz: 250.0,
            ..Default::default()
        };
        match generate_excitation(&spec) {
            Err(NarxError::Config { field, .. }) => assert_eq!(field, "excitation.cutoff_hz"),
            other => panic!("unexpected {other:?}"),
        }
        let spec = ExcitationSpec {
            filter_order: 0,
            ..Default::default()
        };
        assert!(matches!(
            generate_excitation(&spec),
            Err(NarxError::Config { field, .. }) if field == "excitation.filter_order"
        ));
    }

    #[test]
    fn filter_rejects_cutoff_at_nyquist() {
        let x = TimeSeries::new(1.0 / 500.0, vec![1.0; 10]).unwrap();
        assert!(butterworth_lowpass(&x, 250.0, 4).is_err());
        assert!(butterworth_lowpass(&x, 0.0, 4).is_err());
        assert!(butterworth_lowpass(&x, 50.0, 0).is_err());
    }

    #[test]
    fn filter_has_unit_dc_gain() {
        for order in 1..=6 {
            let x = TimeSeries::new(1.0 / 500.0, vec![2.5; 2000]).unwrap();
            let y = butterworth_lowpass(&x, 50.0, order).unwrap();
            assert_eq!(y.len(), 2000);
            assert_relative_eq!(*y.values().last().unwrap(), 2.5, max_relative = 1e-9);
        }
    }

    /// Steady-state amplitude ratio of a filtered sinusoid, measured over the
    /// last whole periods after transients have decayed.
    fn measured_gain(freq_hz: f64, order: usize) -> f64 {
        let fs = 500.0;
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * freq_hz * i as f64 / fs).sin())
            .collect();
        let x = TimeSeries::new(1.0 / fs, vals).unwrap();
        let y = butterworth_lowpass(&x, 50.0, order).unwrap();
        let tail = &y.values()[n / 2..];
        let tail_in = &x.values()[n / 2..];
        (crate::series::rms(tail) / crate::series::rms(tail_in)).abs()
    }

    #[test]
    fn gain_at_cutoff_is_half_power() {
        for order in [1, 2, 3, 4, 5, 8] {
            let g = measured_gain(50.0, order);
            assert!(
                (g - std::f64::consts::FRAC_1_SQRT_2).abs() / std::f64::consts::FRAC_1_SQRT_2 < 0.02,
                "order {order}: gain {g}"
            );
        }
    }

    #[test]
    fn fourth_order_rolloff_at_one_octave() {
        let g = measured_gain(100.0, 4);
        let db = -20.0 * g.log10();
        assert!(db >= 24.0, "attenuation {db} dB");
    }

    #[test]
    fn section_response_matches_analytic_magnitude() {
        // |H(e^{iω})|² = 1 / (1 + (tan(ω/2)/tan(ωc/2))^{2n}) for the bilinear Butterworth
        let fs = 500.0;
        for order in [2usize, 3, 4, 7] {
            let secs = butterworth_sections(50.0, fs, order).unwrap();
            for f in [5.0, 30.0, 50.0, 80.0, 200.0] {
                let w = 2.0 * PI * f / fs;
                let mut mag = 1.0;
                for s in &secs {
                    let (re, im) = s.response(w);
                    mag *= (re * re + im * im).sqrt();
                }
                let ratio = (w / 2.0).tan() / (PI * 50.0 / fs).tan();
                let expected = 1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt();
                assert_relative_eq!(mag, expected, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn zero_forcing_keeps_equilibrium() {
        let x = TimeSeries::new(0.002, vec![0.0; 300]).unwrap();
        let sim = SimulationSpec {
            discard_samples: 100,
            keep_samples: 200,
            ..Default::default()
        };
        let (fx, y) = simulate(&OscillatorParams::default(), &x, &sim).unwrap();
        assert_eq!(fx.len(), 200);
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_excitation_is_rejected() {
        let x = TimeSeries::new(0.002, vec![0.0; 100]).unwrap();
        assert!(matches!(
            simulate(&OscillatorParams::default(), &x, &SimulationSpec::default()),
            Err(NarxError::Config { .. })
        ));
    }

    #[test]
    fn blow_up_reports_step() {
        // Negative cubic stiffness with a large kick escapes to infinity.
        let p = OscillatorParams {
            cubic_stiffness: -5e9,
            ..Default::default()
        };
        let x = TimeSeries::new(0.002, vec![0.0; 5000]).unwrap();
        match integrate_sampled(&p, &x, (0.01, 0.0)) {
            Err(NarxError::Divergence { step, .. }) => assert!(step > 0),
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn energy_decays_without_forcing() {
        let p = OscillatorParams::default();
        let x = TimeSeries::new(0.002, vec![0.0; 3000]).unwrap();
        let (ys, vs) = integrate_sampled(&p, &x, (1e-3, 0.0)).unwrap();
        let mut prev = p.energy(ys[0], vs[0]);
        for (i, (&y, &v)) in ys.iter().zip(&vs).enumerate().skip(1) {
            let e = p.energy(y, v);
            assert!(e <= prev * (1.0 + 1e-9), "energy rose at step {i}: {prev} -> {e}");
            prev = e;
        }
        assert!(prev < 1e-6 * p.energy(1e-3, 0.0));
    }

    #[test]
    fn default_response_is_stationary() {
        let params = OscillatorParams::default();
        let exc = generate_excitation(&ExcitationSpec::default()).unwrap();
        let (x, y) = simulate(&params, &exc, &SimulationSpec::default()).unwrap();
        assert_eq!(x.len(), 4000);
        assert_eq!(y.len(), 4000);
        assert_eq!(x.values(), &exc.values()[10_000..]);
        let ys = y.values();
        let mu = crate::series::mean(ys);
        // Samples are strongly correlated; use an effective sample size from
        // the lag-1 autocorrelation for the standard error of the mean.
        let var = crate::series::variance(ys);
        let rho = ys
            .windows(2)
            .map(|w| (w[0] - mu) * (w[1] - mu))
            .sum::<f64>()
            / (ys.len() as f64 * var);
        let n_eff = ys.len() as f64 * (1.0 - rho) / (1.0 + rho);
        let sem = (var / n_eff).sqrt();
        assert!(mu.abs() < 3.0 * sem, "mean {mu}, sem {sem}");
    }
}

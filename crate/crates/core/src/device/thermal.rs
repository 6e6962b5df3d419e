use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalConfig {
    pub heat_per_frame: f64,
    /// Temperature units shed per second.
    pub cooling_rate: f64,
    pub throttle_threshold: f64,
    pub min_fps_factor: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self { heat_per_frame: 0.01, cooling_rate: 0.2, throttle_threshold: 100.0, min_fps_factor: 0.5 }
    }
}

/// Synthetic heat model of the wearable. Ambient is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub config: ThermalConfig,
    pub temperature: f64,
}

impl ThermalState {
    pub fn new(config: ThermalConfig) -> Self {
        assert!(config.min_fps_factor > 0.0 && config.min_fps_factor <= 1.0);
        assert!(config.throttle_threshold > 0.0);
        Self { config, temperature: 0.0 }
    }

    pub fn fps_factor(&self) -> f64 {
        fps_factor(&self.config, self.temperature)
    }

    /// Accounts for `frames_sent` frames over `elapsed_s` seconds and returns the new fps factor.
    pub fn step(&mut self, frames_sent: u64, elapsed_s: f64) -> f64 {
        assert!(elapsed_s > 0.0, "elapsed must be positive");
        let c = &self.config;
        self.temperature = (self.temperature + c.heat_per_frame * frames_sent as f64 - c.cooling_rate * elapsed_s).max(0.0);
        self.fps_factor()
    }
}

pub fn fps_factor(c: &ThermalConfig, temperature: f64) -> f64 {
    if temperature <= c.throttle_threshold {
        return 1.0;
    }
    let over = ((temperature - c.throttle_threshold) / c.throttle_threshold).min(1.0);
    1.0 - over * (1.0 - c.min_fps_factor)
}

/// Free function form of [`ThermalState::step`].
pub fn step_thermal(state: ThermalState, frames_sent: u64, elapsed_s: f64) -> (ThermalState, f64) {
    let mut next = state;
    let f = next.step(frames_sent, elapsed_s);
    (next, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrottleSample {
    pub t_s: f64,
    pub temperature: f64,
    pub fps_factor: f64,
}

/// Simulates a device sending as fast as the throttle allows, one-second steps.
pub fn simulate_sustained_load(config: ThermalConfig, nominal_fps: f64, seconds: u32) -> Vec<ThrottleSample> {
    let mut state = ThermalState::new(config);
    let mut out = Vec::with_capacity(seconds as usize);
    let mut factor = 1.0;
    let mut carry = 0.0;
    for s in 1..=seconds {
        carry += nominal_fps * factor;
        let frames = carry.floor();
        carry -= frames;
        factor = state.step(frames as u64, 1.0);
        out.push(ThrottleSample { t_s: s as f64, temperature: state.temperature, fps_factor: factor });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_cools_to_ambient() {
        let mut s = ThermalState::new(ThermalConfig::default());
        s.temperature = 50.0;
        assert_eq!(s.step(0, 1000.0), 1.0);
        assert_eq!(s.temperature, 0.0);
    }

    #[test]
    fn boundary_is_unthrottled() {
        let c = ThermalConfig::default();
        assert_eq!(fps_factor(&c, c.throttle_threshold), 1.0);
        assert!((fps_factor(&c, 2.0 * c.throttle_threshold) - c.min_fps_factor).abs() < 1e-12);
        assert!((fps_factor(&c, 1e9) - c.min_fps_factor).abs() < 1e-12);
        assert!((fps_factor(&c, 150.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_temperature() {
        let c = ThermalConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..5000 {
            let f = fps_factor(&c, i as f64 * 0.1);
            assert!(f <= prev);
            assert!(f >= c.min_fps_factor && f <= 1.0);
            prev = f;
        }
    }

    #[test]
    fn sustained_load_throttles_within_half_hour() {
        let trace = simulate_sustained_load(ThermalConfig::default(), 30.0, 1800);
        let onset = trace.iter().find(|s| s.fps_factor < 1.0).expect("no throttling");
        assert!(onset.t_s > 600.0 && onset.t_s < 1800.0, "{onset:?}");
    }
}

use crate::error::{FviError, Result};

/// Values of a trajectory or signal component on the uniform grid
/// `t_k = start + k * step`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    values: Vec<f64>,
    step: f64,
    start: f64,
}

impl GridSeries {
    pub fn new(values: Vec<f64>, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(FviError::InvalidConfiguration(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if values.is_empty() {
            return Err(FviError::InvalidConfiguration(
                "grid series needs at least one value".into(),
            ));
        }
        Ok(Self { values, step, start: 0.0 })
    }

    /// Samples `f` on the `n + 1` grid points of `[0, n * step]`.
    pub fn sample(n: usize, step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..=n).map(|k| f(k as f64 * step)).collect();
        Self::new(values, step)
    }

    /// Same series shifted to start at `start` (used for staggered data
    /// such as interval-midpoint energies).
    pub fn with_start(values: Vec<f64>, step: f64, start: f64) -> Result<Self> {
        let mut s = Self::new(values, step)?;
        s.start = start;
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn start_time(&self) -> f64 {
        self.start
    }

    /// Number of grid intervals `N` (the series holds `N + 1` values).
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_times() {
        let g = GridSeries::sample(4, 0.25, |t| t * t).unwrap();
        assert_eq!(g.intervals(), 4);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(4), 1.0);
        assert_eq!(g.values()[2], 0.25);
    }

    #[test]
    fn rejects_bad_step() {
        assert!(GridSeries::new(vec![1.0], 0.0).is_err());
        assert!(GridSeries::new(vec![], 0.1).is_err());
    }
}

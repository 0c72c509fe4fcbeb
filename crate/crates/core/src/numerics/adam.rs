use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for a set of parameter blocks.
///
/// Blocks are tracked positionally: block `i` of every `step` call must have
/// the same length as block `i` passed to [`AdamState::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, block_sizes: &[usize]) -> Self {
        Self {
            config,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Applies one bias-corrected Adam update in place.
    ///
    /// Gradients are validated before anything is mutated, so a rejected step
    /// leaves both the parameters and the state untouched.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<(), NumericsError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NumericsError::BlockCount {
                expected: self.m.len(),
                params: params.len(),
                grads: grads.len(),
            });
        }
        for (block, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(NumericsError::BlockShape {
                    block,
                    expected: m.len(),
                    params: p.len(),
                    grads: g.len(),
                });
            }
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(NumericsError::NonFiniteGradient { block, index });
            }
        }

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.t as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(state: &mut AdamState, p: &mut f64, g: f64) {
        let mut buf = [*p];
        state.step(&mut [&mut buf[..]], &[vec![g]]).unwrap();
        *p = buf[0];
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut state = AdamState::new(AdamConfig::default(), &[3]);
        let mut p = [1.0, -2.0, 0.5];
        for _ in 0..5 {
            state.step(&mut [&mut p[..]], &[vec![0.0; 3]]).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(state.steps(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut state = AdamState::new(AdamConfig::default(), &[1]);
        let mut p = 1.0;
        scalar_step(&mut state, &mut p, 0.5);
        let expected = 1.0 - 0.001 * (0.5 / (0.5 + 1e-8));
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.999).abs() < 1e-9);
    }

    #[test]
    fn two_constant_gradient_steps_match_hand_oracle() {
        let (lr, b1, b2, eps) = (0.001f64, 0.9f64, 0.999f64, 1e-8f64);
        let g = 0.5f64;
        let (mut m, mut v, mut expect) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            expect -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        let mut state = AdamState::new(AdamConfig::default(), &[1]);
        let mut p = 1.0;
        scalar_step(&mut state, &mut p, g);
        scalar_step(&mut state, &mut p, g);
        assert!((p - expect).abs() < 1e-12);
        assert_eq!(state.steps(), 2);
    }

    #[test]
    fn non_finite_gradient_names_block_and_leaves_state() {
        let mut state = AdamState::new(AdamConfig::default(), &[2, 2]);
        let mut a = [0.0, 0.0];
        let mut b = [0.0, 0.0];
        let err = state
            .step(&mut [&mut a[..], &mut b[..]], &[vec![0.0, 0.0], vec![1.0, f64::NAN]])
            .unwrap_err();
        assert!(matches!(err, NumericsError::NonFiniteGradient { block: 1, index: 1 }));
        assert_eq!(state.steps(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        let mut a = [0.0, 0.0, 0.0];
        assert!(state.step(&mut [&mut a[..]], &[vec![0.0; 3]]).is_err());
    }

    #[test]
    fn second_moment_non_negative() {
        let mut state = AdamState::new(AdamConfig::default(), &[4]);
        let mut p = [0.0; 4];
        for k in 0..10 {
            let g = vec![-(k as f64), 0.5, -3.0, 2.0];
            state.step(&mut [&mut p[..]], &[g]).unwrap();
        }
        assert!(state.second_moment()[0].iter().all(|&v| v >= 0.0));
    }
}

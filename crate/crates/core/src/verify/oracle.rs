use super::VerifyError;

/// Largest horizon for which path counts stay exact in `u64`/`f64`.
pub const MAX_ORACLE_STEPS: usize = 40;

/// `hits / paths` with `paths = 2^K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactProbability {
    pub hits: u64,
    pub paths: u64,
}

impl ExactProbability {
    pub fn value(&self) -> f64 {
        // dyadic with at most 40 bits: exact in f64
        self.hits as f64 / self.paths as f64
    }
}

/// Exact `P{∃k ≤ K: Y_k ≥ t and k ≤ σ²}` for the scalar ±1 walk, where
/// `W_k = k`.
///
/// Dynamic programming over positions, counting paths; a path is absorbed
/// the first time it satisfies both conditions.
pub fn scalar_walk_oracle(
    steps: usize,
    t: f64,
    sigma2: f64,
) -> Result<ExactProbability, VerifyError> {
    if steps > MAX_ORACLE_STEPS {
        return Err(VerifyError::OracleHorizon {
            steps,
            max: MAX_ORACLE_STEPS,
        });
    }
    let offset = steps as i64;
    let width = 2 * steps + 1;
    let mut live = vec![0u64; width];
    let mut absorbed: u64 = 0;
    if 0.0 >= t && 0.0 <= sigma2 {
        absorbed = 1;
    } else {
        live[steps] = 1;
    }
    for k in 1..=steps {
        absorbed *= 2;
        let mut next = vec![0u64; width];
        for (i, &c) in live.iter().enumerate() {
            if c == 0 {
                continue;
            }
            next[i - 1] += c;
            next[i + 1] += c;
        }
        if k as f64 <= sigma2 {
            for (i, c) in next.iter_mut().enumerate() {
                let y = i as i64 - offset;
                if *c > 0 && y as f64 >= t {
                    absorbed += *c;
                    *c = 0;
                }
            }
        }
        live = next;
    }
    Ok(ExactProbability {
        hits: absorbed,
        paths: 1u64 << steps,
    })
}

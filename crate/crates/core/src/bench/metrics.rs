use nalgebra::DVector;

/// State indices of `(px, py)`.
pub const POSITION: [usize; 2] = [0, 2];
/// State indices of `(vx, vy)`.
pub const VELOCITY: [usize; 2] = [1, 3];

/// Running sums of squared Euclidean errors.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorSums {
    pub pos_sq: f64,
    pub vel_sq: f64,
    pub count: usize,
}

impl ErrorSums {
    pub fn push(&mut self, error: &DVector<f64>) {
        self.pos_sq += squared(error, &POSITION);
        self.vel_sq += squared(error, &VELOCITY);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &ErrorSums) {
        self.pos_sq += other.pos_sq;
        self.vel_sq += other.vel_sq;
        self.count += other.count;
    }

    pub fn pos_rmse(&self) -> f64 {
        (self.pos_sq / (self.count * POSITION.len()) as f64).sqrt()
    }

    pub fn vel_rmse(&self) -> f64 {
        (self.vel_sq / (self.count * VELOCITY.len()) as f64).sqrt()
    }
}

fn squared(error: &DVector<f64>, components: &[usize]) -> f64 {
    components.iter().map(|&i| error[i] * error[i]).sum()
}

/// Root mean squared error over every error vector and every selected
/// component, i.e. per-coordinate RMSE. Raw position measurements with noise
/// variance `σ²` on each axis score `σ`.
pub fn rmse(errors: &[DVector<f64>], components: &[usize]) -> f64 {
    assert!(!errors.is_empty(), "rmse of an empty error set");
    let total: f64 = errors.iter().map(|e| squared(e, components)).sum();
    (total / (errors.len() * components.len()) as f64).sqrt()
}

/// Pools `(sum of squares, number of scalar terms)` partials into one RMSE.
pub fn pooled_rmse(partials: &[(f64, usize)]) -> f64 {
    let (sum, count) = partials.iter().fold((0.0, 0usize), |(s, c), (ps, pc)| (s + ps, c + pc));
    (sum / count as f64).sqrt()
}

/// `iter / base`; a zero baseline gives `+inf` unless both are zero.
pub fn relative_rmse(iter: f64, base: f64) -> f64 {
    if base == 0.0 {
        if iter == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        iter / base
    }
}

/// Position RMSE strictly above the measurement noise standard deviation.
/// Non-finite RMSEs count as diverged.
pub fn divergence_flag(pos_rmse: f64, sigma2: f64) -> bool {
    !(pos_rmse <= sigma2.sqrt())
}

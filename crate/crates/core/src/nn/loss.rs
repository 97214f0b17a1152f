/// Probability clamp used by the loss.
pub const BCE_EPS: f64 = 1e-7;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted binary cross-entropy of probability `p` against label `y`.
pub fn bce_loss(p: f64, y: bool, weight: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if y {
        -weight * p.ln()
    } else {
        -weight * (1.0 - p).ln()
    }
}

/// Derivative of `bce_loss(sigmoid(z), y, weight)` with respect to `z`.
///
/// Inside the clamp this is `weight * (p - y)`; where the clamp is active the
/// loss is flat in `z` and the derivative is zero.
pub fn bce_grad_logit(p: f64, y: bool, weight: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
        return 0.0;
    }
    weight * (p - if y { 1.0 } else { 0.0 })
}

//! Inverse-CDF sampling from unnormalized densities tabulated on nodes.

/// Underflow guard for normalizing constants.
pub const DEN_FLOOR: f64 = 1e-300;

/// Nodes with nonnegative weights, read as a piecewise-linear density.
#[derive(Clone, Debug, Default)]
pub(crate) struct Mesh {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    cum: Vec<f64>,
}

impl Mesh {
    pub(crate) fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut m = Self { nodes, weights, cum: Vec::new() };
        m.mass();
        m
    }

    /// Total trapezoid mass of the current weights (refreshes the cumulative table).
    pub(crate) fn mass(&mut self) -> f64 {
        self.cum.clear();
        self.cum.push(0.0);
        let mut acc = 0.0;
        for i in 1..self.nodes.len() {
            acc += 0.5 * (self.weights[i - 1] + self.weights[i]) * (self.nodes[i] - self.nodes[i - 1]);
            self.cum.push(acc);
        }
        acc
    }

    pub(crate) fn total(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Point where the cumulative mass reaches `target`.
    pub(crate) fn quantile(&self, target: f64) -> f64 {
        let i = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1) - 1;
        let r = target - self.cum[i];
        let h = self.nodes[i + 1] - self.nodes[i];
        let (w0, w1) = (self.weights[i], self.weights[i + 1]);
        let a = (w1 - w0) / h;
        let disc = (w0 * w0 + 2.0 * a * r).max(0.0);
        let denom = w0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        self.nodes[i] + s.clamp(0.0, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_follow_piecewise_linear_density() {
        let nodes: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        // density 2z on [0, 1]: CDF z², quantile √u
        let weights = nodes.iter().map(|z| 2.0 * z).collect();
        let m = Mesh::new(nodes.clone(), weights);
        assert!((m.total() - 1.0).abs() < 1e-15);
        for u in [0.0, 0.1, 0.25, 0.5, 0.9, 0.999] {
            let z = m.quantile(u);
            assert!((z - f64::sqrt(u)).abs() < 1e-12, "{u} {z}");
        }
        assert_eq!(Mesh::new(nodes, vec![0.0; 5]).quantile(0.0), 0.0);
    }
}

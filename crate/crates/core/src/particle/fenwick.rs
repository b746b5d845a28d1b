//! Fenwick tree over nonnegative event weights with O(log n) prefix
//! sampling; the core of the event engine's site selection.

#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
    n: usize,
    /// Largest power of two <= n, the starting stride of the descent.
    top: usize,
}

impl Fenwick {
    pub fn from_weights(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] = w;
        }
        for i in 1..=n {
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        let mut top = 1;
        while top * 2 <= n {
            top *= 2;
        }
        Fenwick { tree, n, top }
    }

    pub fn add(&mut self, index: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let mut i = index + 1;
        while i <= self.n {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.n)
    }

    /// Sum of weights at indices `< end`.
    pub fn prefix(&self, end: usize) -> f64 {
        let mut i = end.min(self.n);
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i];
            i &= i - 1;
        }
        acc
    }

    /// Smallest index whose cumulative weight exceeds `target`; callers draw
    /// `target` uniform on `[0, total)`.
    pub fn sample(&self, mut target: f64) -> usize {
        let mut pos = 0usize;
        let mut stride = self.top;
        while stride > 0 {
            let next = pos + stride;
            if next <= self.n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            stride >>= 1;
        }
        pos.min(self.n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_and_sample_agree_with_linear_scan() {
        let weights = [0.5, 0.0, 1.25, 3.0, 0.25, 2.0, 0.0, 1.0];
        let f = Fenwick::from_weights(&weights);
        let total: f64 = weights.iter().sum();
        assert!((f.total() - total).abs() < 1e-12);
        for k in 0..200 {
            let target = total * (k as f64 + 0.5) / 200.0;
            let got = f.sample(target);
            let mut acc = 0.0;
            let mut expect = weights.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if acc > target {
                    expect = i;
                    break;
                }
            }
            assert_eq!(got, expect, "target {target}");
        }
    }

    #[test]
    fn updates_track_weights() {
        let mut weights = vec![1.0; 16];
        let mut f = Fenwick::from_weights(&weights);
        let deltas = [(3usize, 2.5), (0, -1.0), (15, 4.0), (3, -2.5), (7, 0.125)];
        for &(i, d) in &deltas {
            f.add(i, d);
            weights[i] += d;
        }
        for end in 0..=16 {
            let expect: f64 = weights[..end].iter().sum();
            assert!((f.prefix(end) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weight_sites_are_skipped() {
        let weights = [0.0, 0.0, 5.0, 0.0];
        let f = Fenwick::from_weights(&weights);
        assert_eq!(f.sample(0.0), 2);
        assert_eq!(f.sample(4.999), 2);
    }
}

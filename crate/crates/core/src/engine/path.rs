/// Straight line from a baseline to an input, `gamma(t) = baseline + t (input - baseline)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StraightLinePath {
    input: Vec<f64>,
    baseline: Vec<f64>,
    delta: Vec<f64>,
}

impl StraightLinePath {
    /// Panics if the two vectors differ in length.
    pub fn new(input: &[f64], baseline: &[f64]) -> Self {
        assert_eq!(input.len(), baseline.len(), "input and baseline lengths differ");
        let delta = input.iter().zip(baseline).map(|(x, b)| x - b).collect();
        Self {
            input: input.to_vec(),
            baseline: baseline.to_vec(),
            delta,
        }
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn dim(&self) -> usize {
        self.delta.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta.iter().all(|d| *d == 0.0)
    }

    /// Point at parameter `t`. `t = 0` and `t = 1` return the endpoints exactly.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write_at(t, &mut out);
        out
    }

    pub fn write_at(&self, t: f64, out: &mut [f64]) {
        if t == 1.0 {
            out.copy_from_slice(&self.input);
            return;
        }
        for ((o, b), d) in out.iter_mut().zip(&self.baseline).zip(&self.delta) {
            *o = b + t * d;
        }
    }

    /// The path that starts at the same baseline and ends at `self.at(s)`.
    pub fn truncated(&self, s: f64) -> Self {
        Self::new(&self.at(s), &self.baseline)
    }
}

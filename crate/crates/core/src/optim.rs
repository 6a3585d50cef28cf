//! First-order optimisers: Adam (training) and box-projected L-BFGS (acquisition refinement).

use std::collections::VecDeque;

/// Adam with bias correction. Maximises by ascending `grad`.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] += self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    pub gtol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 50,
            gtol: 1e-9,
        }
    }
}

fn clip(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximises `f` over the box `[lo, hi]` from `x0`. `f` returns the value and
/// writes the gradient. The returned value is never below `f(x0)`.
pub fn maximize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: LbfgsOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clip(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    // Work with the minimisation of −f.
    let mut fx = -f(&x, &mut g);
    g.iter_mut().for_each(|v| *v = -*v);
    if !fx.is_finite() {
        return (x, -fx);
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut gn = vec![0.0; n];
    let mut xn = vec![0.0; n];

    for _ in 0..opts.max_iters {
        // Freeze coordinates pinned at a bound by the gradient.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        if pg.iter().map(|v| v.abs()).fold(0.0, f64::max) < opts.gtol {
            break;
        }
        // Two-loop recursion.
        let mut q = pg.clone();
        let mut alpha = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alpha.push(a);
        }
        let gamma = hist
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / dot(&pg, &pg).sqrt().max(1e-12));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alpha.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut dir: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            hist.clear();
        }

        let mut t = 1.0;
        let mut accepted = false;
        let mut fnew = fx;
        for _ in 0..30 {
            for i in 0..n {
                xn[i] = x[i] + t * dir[i];
            }
            clip(&mut xn, lo, hi);
            let step: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            fnew = -f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step.min(0.0) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        gn.iter_mut().for_each(|v| *v = -*v);
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        let improvement = fx - fnew;
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        fx = fnew;
        if sy > 1e-12 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > opts.memory {
                hist.pop_front();
            }
        }
        if improvement.abs() <= 1e-14 * fx.abs().max(1.0) {
            break;
        }
    }
    (x, -fx)
}

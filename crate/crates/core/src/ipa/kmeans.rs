use nalgebra::DMatrix;
use rand::Rng;

const ITERATIONS: usize = 50;
const RESTARTS: usize = 3;

fn sq(a: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|k| (a[(i, k)] - c[(j, k)]).powi(2)).sum()
}

fn plus_plus<R: Rng + ?Sized>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut c = DMatrix::zeros(k, d);
    let first = rng.random_range(0..n);
    c.row_mut(0).copy_from(&x.row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq(x, i, &c, 0)).collect();
    for j in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in dist.iter().enumerate() {
                if u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        c.row_mut(j).copy_from(&x.row(pick));
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq(x, i, &c, j));
        }
    }
    c
}

fn lloyd(x: &DMatrix<f64>, mut c: DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (n, d) = x.shape();
    let k = c.nrows();
    let mut assign = vec![0usize; n];
    for _ in 0..ITERATIONS {
        let mut changed = false;
        for i in 0..n {
            let mut best = (0, f64::INFINITY);
            for j in 0..k {
                let v = sq(x, i, &c, j);
                if v < best.1 {
                    best = (j, v);
                }
            }
            if assign[i] != best.0 {
                assign[i] = best.0;
                changed = true;
            }
        }
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for t in 0..d {
                sums[(assign[i], t)] += x[(i, t)];
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // Re-seed an empty cluster at the point worst served by its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| sq(x, a, &c, assign[a]).total_cmp(&sq(x, b, &c, assign[b])))
                    .expect("nonempty data");
                c.row_mut(j).copy_from(&x.row(far));
                assign[far] = j;
                changed = true;
            } else {
                for t in 0..d {
                    c[(j, t)] = sums[(j, t)] / counts[j] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| (0..k).map(|j| sq(x, i, &c, j)).fold(f64::INFINITY, f64::min))
        .sum();
    (c, inertia)
}

/// Lloyd's algorithm from k-means++ seeds, best of three restarts by
/// within-cluster sum of squares. Returns `x` itself when `k ≥ N`.
pub fn kmeans_centroids<R: Rng + ?Sized>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    if k >= x.nrows() {
        return x.clone();
    }
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for _ in 0..RESTARTS {
        let (c, w) = lloyd(x, plus_plus(x, k, rng));
        if best.as_ref().is_none_or(|b| w < b.1) {
            best = Some((c, w));
        }
    }
    best.expect("at least one restart").0
}

//! Exact squared Euclidean distance transform with anisotropic spacing.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb &
//! Huttenlocher), one pass per axis. Positions are in millimetres, so the
//! result is the exact squared distance to the nearest feature voxel center,
//! up to floating-point rounding.

/// Squared distance (mm²) from every voxel to the nearest voxel with
/// `features[i] == true`. Voxels with no feature anywhere get `f64::INFINITY`.
pub fn squared_edt(dims: [usize; 3], spacing: [f64; 3], features: &[bool]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    debug_assert_eq!(features.len(), nx * ny * nz);
    let mut d: Vec<f64> = features
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();

    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut scratch = Envelope::with_capacity(longest);

    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let stride = strides[axis];
        // iterate over every line parallel to `axis`
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[b] {
            for i in 0..dims[a] {
                let start = i * strides[a] + j * strides[b];
                for k in 0..n {
                    line[k] = d[start + k * stride];
                }
                scratch.transform(&line[..n], spacing[axis], &mut out[..n]);
                for k in 0..n {
                    d[start + k * stride] = out[k];
                }
            }
        }
    }
    d
}

struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// out[q] = min_p (f[p] + ((q - p) * h)^2)
    fn transform(&mut self, f: &[f64], h: f64, out: &mut [f64]) {
        let n = f.len();
        self.vertices.clear();
        self.bounds.clear();
        let pos = |k: usize| k as f64 * h;

        for q in 0..n {
            if f[q].is_infinite() {
                continue;
            }
            let pq = pos(q);
            loop {
                let Some(&p) = self.vertices.last() else {
                    self.vertices.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let pp = pos(p);
                let s = ((f[q] + pq * pq) - (f[p] + pp * pp)) / (2.0 * (pq - pp));
                if s <= *self.bounds.last().unwrap() {
                    self.vertices.pop();
                    self.bounds.pop();
                } else {
                    self.vertices.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }

        if self.vertices.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        self.bounds.push(f64::INFINITY);
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let pq = pos(q);
            while self.bounds[k + 1] < pq {
                k += 1;
            }
            let p = self.vertices[k];
            let delta = pq - pos(p);
            *o = f[p] + delta * delta;
        }
    }
}

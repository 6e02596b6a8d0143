use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WithinOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WithinOptions {
    fn default() -> Self {
        WithinOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn n_levels(idx: &[usize]) -> usize {
    idx.iter().max().map_or(0, |m| m + 1)
}

fn demean_by(v: &mut [f64], idx: &[usize], levels: usize, sums: &mut [f64], counts: &mut [f64]) -> f64 {
    sums[..levels].iter_mut().for_each(|s| *s = 0.0);
    counts[..levels].iter_mut().for_each(|c| *c = 0.0);
    for (x, &g) in v.iter().zip(idx) {
        sums[g] += x;
        counts[g] += 1.0;
    }
    let mut largest = 0.0f64;
    for g in 0..levels {
        if counts[g] > 0.0 {
            sums[g] /= counts[g];
            largest = largest.max(sums[g].abs());
        }
    }
    for (x, &g) in v.iter_mut().zip(idx) {
        *x -= sums[g];
    }
    largest
}

/// Two-way demeaning by alternating projections onto the unit and year
/// dummy spaces. Exact in one sweep for balanced panels.
pub fn within_transform(values: &[f64], unit_idx: &[usize], year_idx: &[usize], opts: WithinOptions) -> Vec<f64> {
    assert_eq!(values.len(), unit_idx.len(), "one unit index per value");
    assert_eq!(values.len(), year_idx.len(), "one year index per value");
    let nu = n_levels(unit_idx);
    let ny = n_levels(year_idx);
    let mut sums = vec![0.0; nu.max(ny)];
    let mut counts = vec![0.0; nu.max(ny)];
    let mut v = values.to_vec();
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    for _ in 0..opts.max_iter {
        let a = demean_by(&mut v, unit_idx, nu, &mut sums, &mut counts);
        let b = demean_by(&mut v, year_idx, ny, &mut sums, &mut counts);
        if a.max(b) <= opts.tol * scale {
            break;
        }
    }
    v
}

/// Column-wise [`within_transform`].
pub fn within_transform_columns(
    m: &DMatrix<f64>,
    unit_idx: &[usize],
    year_idx: &[usize],
    opts: WithinOptions,
) -> DMatrix<f64> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let col: Vec<f64> = m.column(j).iter().copied().collect();
        let d = within_transform(&col, unit_idx, year_idx, opts);
        out.column_mut(j).copy_from_slice(&d);
    }
    out
}

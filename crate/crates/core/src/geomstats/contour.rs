//! Marching squares over a structured grid with linear edge interpolation.

/// Total length of the `z`-level set of `values` (row-major, `rows × cols`).
///
/// Columns are periodic. Rows are periodic when `wrap_rows` is set; otherwise the
/// cells span rows `0..rows−1`. `point(i, j, u, v)` maps the local coordinates
/// `(u, v) ∈ [0,1]²` of cell `(i, j)` (u along rows, v along columns) to a position,
/// and `dist` measures a straight segment between two positions of the same cell.
/// Saddle cells are resolved by the mean of the four corners.
pub fn marching_squares<P: Copy>(
    values: &[f64],
    rows: usize,
    cols: usize,
    wrap_rows: bool,
    z: f64,
    point: impl Fn(usize, usize, f64, f64) -> P,
    dist: impl Fn(P, P) -> f64,
) -> f64 {
    let cell_rows = if wrap_rows { rows } else { rows.saturating_sub(1) };
    let frac = |a: f64, b: f64| ((z - a) / (b - a)).clamp(0.0, 1.0);
    let mut total = 0.0;
    for i in 0..cell_rows {
        let i1 = (i + 1) % rows;
        let top = &values[i * cols..(i + 1) * cols];
        let bottom = &values[i1 * cols..(i1 + 1) * cols];
        for j in 0..cols {
            let j1 = (j + 1) % cols;
            // Corners in cyclic order: a=(0,0), b=(0,1), c=(1,1), d=(1,0).
            let (a, b, c, d) = (top[j], top[j1], bottom[j1], bottom[j]);
            let mask = (a > z) as u8 | ((b > z) as u8) << 1 | ((c > z) as u8) << 2 | ((d > z) as u8) << 3;
            if mask == 0 || mask == 15 {
                continue;
            }
            let e_top = || point(i, j, 0.0, frac(a, b));
            let e_right = || point(i, j, frac(b, c), 1.0);
            let e_bottom = || point(i, j, 1.0, frac(d, c));
            let e_left = || point(i, j, frac(a, d), 0.0);
            total += match mask {
                1 | 14 => dist(e_left(), e_top()),
                2 | 13 => dist(e_top(), e_right()),
                4 | 11 => dist(e_right(), e_bottom()),
                8 | 7 => dist(e_bottom(), e_left()),
                3 | 12 => dist(e_left(), e_right()),
                6 | 9 => dist(e_top(), e_bottom()),
                5 | 10 => {
                    let centre_above = 0.25 * (a + b + c + d) > z;
                    if centre_above == (a > z) {
                        // a and c are joined through the centre; b and d are cut off.
                        dist(e_top(), e_right()) + dist(e_bottom(), e_left())
                    } else {
                        dist(e_left(), e_top()) + dist(e_right(), e_bottom())
                    }
                }
                _ => unreachable!(),
            };
        }
    }
    total
}

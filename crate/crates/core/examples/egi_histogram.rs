//! Extended Gaussian image of a box: all mass lands on the six face normals.

use spectral_servo::egi::build_egi;
use spectral_servo::shapes::{generate_shape, ShapeKind};

fn main() -> spectral_servo::Result<()> {
    let cloud = generate_shape(ShapeKind::Box { size: [0.10, 0.06, 0.04] }, 6000, 7)?;
    let egi = build_egi(&cloud, 16)?;
    let grid = egi.grid();
    let mut bins: Vec<(u64, usize, usize)> = (0..grid.side())
        .flat_map(|j| (0..grid.side()).map(move |k| (j, k)))
        .map(|(j, k)| (egi.count(j, k), j, k))
        .filter(|b| b.0 > 0)
        .collect();
    bins.sort_unstable_by(|a, b| b.cmp(a));
    println!("{} points in {} occupied bins", egi.total(), bins.len());
    for (count, j, k) in bins.iter().take(8) {
        let n = grid.direction(*j, *k);
        println!("{count:5}  node ({j:2},{k:2})  direction [{:+.2} {:+.2} {:+.2}]", n.x, n.y, n.z);
    }
    Ok(())
}

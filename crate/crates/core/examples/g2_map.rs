//! Map g2 against a reference region and locate the conjugate area.

use std::error::Error;

use iccd_calib::calib::{find_conjugate_region, Acquisition, ConjugateSearch};
use iccd_calib::{conjugate_region, Region, SimConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let config = SimConfig::closed_loop(2);
    let acq = Acquisition::new(&config, 30_000, 300)?;
    let reference = Region::new(10, 29, 6, 6, "reference")?;
    let map = acq.g2_map(&reference, 5)?;

    let g = &map.geometry;
    for y in (20..44).step_by(2) {
        let row: String = (0..g.width())
            .step_by(2)
            .map(|x| match map.get(x, y) {
                None => ' ',
                Some(v) if v > 2.0 && map.joint_tail_probability(g.index(x, y)) < 1e-6 => '#',
                Some(_) => '.',
            })
            .collect();
        println!("{row}");
    }

    let found = find_conjugate_region(&map, &ConjugateSearch::default())?;
    let analytic = conjugate_region(&reference, g, 0)?;
    println!("located {found}, point reflection of the reference is {analytic}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

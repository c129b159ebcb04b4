//! Average GMRES iterations of the academic cube problem for each
//! preconditioner on a few structured meshes.
//!
//! `cargo run --release --example academic_lite -- [steps]`

use std::sync::Arc;
use std::time::Instant;

use tangent_plane_llg::fem::FemSpace;
use tangent_plane_llg::physics::{AppliedField, PiKind};
use tangent_plane_llg::precond::PrecondKind;
use tangent_plane_llg::scheme::{run_simulation, SchemeCoefficients, SolveSettings, Stepper};
use tangent_plane_llg::tangent::{TnCandidate, TnChoice};
use tangent_plane_llg::{generate_structured_cube, Box3, MagnetizationField};

fn main() -> tangent_plane_llg::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(10, |s| s.parse().expect("steps"));
    let coeffs = SchemeCoefficients::tps1(0.5, 10.0)?;
    println!("n precond avg_iterations max_iterations seconds");
    for n in [4, 6, 8] {
        let space = Arc::new(FemSpace::new(generate_structured_cube(Box3::unit(), [n, n, n])?));
        for kind in PrecondKind::ALL {
            let settings = SolveSettings { precond: kind, tn: TnChoice::Fixed(TnCandidate::T3Minus), ..Default::default() };
            let mut stepper = Stepper::new(space.clone(), coeffs, 1e-2, PiKind::Zero, AppliedField::Academic { amplitude: 10.0 }, settings)?;
            let m0 = MagnetizationField::uniform(space.num_nodes(), [1.0, 0.0, 0.0])?;
            let start = Instant::now();
            let (_, summary) = run_simulation(&mut stepper, m0, steps, &mut |_, _| Ok(()))?;
            println!("{n} {} {:.2} {} {:.2}", kind.name(), summary.avg_iterations, summary.max_iterations, start.elapsed().as_secs_f64());
        }
    }
    Ok(())
}

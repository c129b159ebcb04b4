//! Average GMRES iterations for α_P ∈ {α, 1} at small damping on a thin
//! permalloy-like slab with uniaxial anisotropy.
//!
//! `cargo run --release --example alpha_p_study -- [steps]`

use std::sync::Arc;

use tangent_plane_llg::config::InitialCondition;
use tangent_plane_llg::fem::FemSpace;
use tangent_plane_llg::physics::{AppliedField, PiKind};
use tangent_plane_llg::precond::PrecondKind;
use tangent_plane_llg::scheme::{run_simulation, SchemeCoefficients, SolveSettings, Stepper};
use tangent_plane_llg::{generate_structured_cube, Box3};

fn main() -> tangent_plane_llg::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(20, |s| s.parse().expect("steps"));
    let alpha = 0.02;
    let coeffs = SchemeCoefficients::tps1(alpha, 32.3283)?;
    let mesh = generate_structured_cube(Box3 { min: [0.0; 3], max: [100.0, 25.0, 3.0] }, [20, 5, 1])?;
    let space = Arc::new(FemSpace::new(mesh));
    let m0 = InitialCondition::Helix { wavevector: [std::f64::consts::PI / 100.0, 0.0, 0.0], tilt: 0.2 }.build(space.mesh().nodes())?;
    let pi = PiKind::Uniaxial { axis: [1.0, 0.0, 0.0], strength: 0.5 };
    println!("precond alpha_p avg_iterations max_iterations");
    for kind in [PrecondKind::Theoretical, PrecondKind::Stationary, PrecondKind::Practical] {
        for alpha_p in [alpha, 1.0] {
            let settings = SolveSettings { precond: kind, alpha_p, ..Default::default() };
            let mut stepper = Stepper::new(space.clone(), coeffs, 0.017688, pi.clone(), AppliedField::Constant { value: [0.0; 3] }, settings)?;
            let (_, s) = run_simulation(&mut stepper, m0.clone(), steps, &mut |_, _| Ok(()))?;
            println!("{} {alpha_p} {:.2} {}", kind.name(), s.avg_iterations, s.max_iterations);
        }
    }
    Ok(())
}

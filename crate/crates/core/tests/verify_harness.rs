use cns_core::verify::mms::*;
use cns_core::verify::oracle::{oracle_refinement, ManufacturedCase, Term};
use cns_core::SlabGrid;

fn study(solver: MmsSolver, r: Refinement) -> ConvergenceTable {
    let grids = match r {
        Refinement::Space => space_grids(),
        Refinement::Time => time_grids(),
    };
    mms_study(solver, r, &grids).unwrap()
}

#[test]
fn parabolic_pair_converges() {
    for r in [Refinement::Space, Refinement::Time] {
        let t = study(MmsSolver::Parabolic, r);
        assert!(t.pass, "{:?}", t.orders);
        for f in ["w", "h"] {
            assert!(t.order(f).unwrap() >= r.threshold());
        }
    }
}

#[test]
fn stokes_evolution_converges() {
    for r in [Refinement::Space, Refinement::Time] {
        let t = study(MmsSolver::Stokes, r);
        assert!(t.pass, "{:?}", t.orders);
        assert_eq!(t.fields, vec!["v", "q", "eta"]);
    }
}

#[test]
fn stationary_stokes_converges_in_space() {
    let t = study(MmsSolver::Stationary, Refinement::Space);
    assert!(t.pass, "{:?}", t.orders);
    assert!(mms_study(MmsSolver::Stationary, Refinement::Time, &time_grids()).is_err());
}

#[test]
fn study_grids_follow_the_refinement_plan() {
    let s = space_grids();
    assert_eq!(s.iter().map(|g| g.nz).collect::<Vec<_>>(), vec![17, 33, 65]);
    let t = time_grids();
    let dts: Vec<f64> = t.iter().map(|g| g.dt).collect();
    for (a, b) in dts.iter().zip([4e-3, 2e-3, 1e-3]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn solver_and_refinement_names_parse() {
    for s in [MmsSolver::Parabolic, MmsSolver::Stokes, MmsSolver::Stationary] {
        assert_eq!(s.name().parse::<MmsSolver>().unwrap(), s);
    }
    assert!("navier".parse::<MmsSolver>().is_err());
    assert_eq!("time".parse::<Refinement>().unwrap(), Refinement::Time);
}

#[test]
fn oracle_orders_on_coarse_grids() {
    let grids: Vec<SlabGrid> = [9, 17, 33].iter().map(|&nz| SlabGrid::cube(16, nz).unwrap()).collect();
    let r = oracle_refinement(&ManufacturedCase::smooth(0.05), &grids, 0.3).unwrap();
    for t in Term::ALL {
        assert!(r.order(t) > 1.8, "{} {}", t.name(), r.order(t));
    }
}

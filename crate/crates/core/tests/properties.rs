use bogolab_core::bogoliubov::{bogoliubov_energy, dispersion};
use bogolab_core::eigensolver::{lowest_eigenpairs_with, MethodChoice, SolverOptions};
use bogolab_core::fock::{diagonal_observable, enumerate_basis, Observable};
use bogolab_core::hamiltonian::{build_hn, read_matrix_market};
use bogolab_core::lattice::{modes_within, Geometry, ModeSet, MomentumMode, TWO_PI, TWO_PI_SQ};
use bogolab_core::potential::{make_potential, Potential};
use bogolab_core::sector::{brute_force_sector_min, sector_minimum};
use proptest::prelude::*;

/// Modes `m` with first nonzero coordinate positive, `max |m_i| ≤ 2`.
fn half_space(dim: usize) -> Vec<MomentumMode> {
    modes_within(dim, 2, Geometry::Box)
        .unwrap()
        .iter()
        .filter(|m| m.coords().iter().find(|&&c| c != 0).is_some_and(|&c| c > 0))
        .cloned()
        .collect()
}

fn potential(dim: usize) -> impl Strategy<Value = Potential> {
    let half = half_space(dim);
    let n = half.len();
    (
        0.0..5.0f64,
        prop::collection::vec(prop_oneof![Just(0.0), 0.0..4.0f64], n),
    )
        .prop_map(move |(v0, values)| {
            let mut entries = vec![(MomentumMode::zero(dim), v0)];
            for (m, v) in half.iter().zip(values) {
                if v > 0.0 {
                    entries.push((m.clone(), v));
                    entries.push((m.neg(), v));
                }
            }
            make_potential(dim, entries).unwrap()
        })
}

fn any_potential() -> impl Strategy<Value = Potential> {
    prop_oneof![potential(1), potential(2)]
}

fn mode(dim: usize, radius: i32) -> impl Strategy<Value = MomentumMode> {
    prop::collection::vec(-radius..=radius, dim).prop_map(MomentumMode::new)
}

fn smallest_excitation(pot: &Potential) -> f64 {
    modes_within(pot.dim(), 3, Geometry::Box)
        .unwrap()
        .iter()
        .filter(|m| !m.is_zero())
        .map(|m| dispersion(pot, m).unwrap())
        .fold(f64::INFINITY, f64::min)
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn lowest(pot: &Potential, modes: &ModeSet, n: usize, sector: &MomentumMode, m: usize) -> Vec<f64> {
    let basis = enumerate_basis(modes, n, sector).unwrap();
    if basis.is_empty() {
        return Vec::new();
    }
    let h = build_hn(&basis, pot).unwrap();
    let opts = SolverOptions {
        method: MethodChoice::Dense,
        ..SolverOptions::default()
    };
    lowest_eigenpairs_with(&h, m.min(h.dim()), 1e-10, 0, &opts)
        .unwrap()
        .values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ebog_is_monotone_and_bracketed(pot in any_potential()) {
        let dim = pot.dim();
        let top = if dim == 1 { 8 } else { 4 };
        let summaries: Vec<_> = (0..=top)
            .map(|c| bogoliubov_energy(&pot, &modes_within(dim, c, Geometry::Ball).unwrap()).unwrap())
            .collect();
        let last = summaries.last().unwrap().ebog_truncated;
        for pair in summaries.windows(2) {
            prop_assert!(pair[1].ebog_truncated <= pair[0].ebog_truncated);
            prop_assert!(pair[1].tail_bound <= pair[0].tail_bound);
        }
        for s in &summaries {
            let slack = 1e-12 * s.ebog_truncated.abs().max(1e-300);
            prop_assert!(last <= s.ebog_truncated + slack);
            prop_assert!(last >= s.ebog_truncated - s.tail_bound - slack);
        }
        // the support lies in the |m| ≤ 2√2 ball
        prop_assert_eq!(summaries[3].tail_bound, 0.0);
    }

    #[test]
    fn sector_minimum_agrees_with_enumeration(
        pot in any_potential(),
        coords in prop::collection::vec(-3i32..=3, 2),
        stretch in 1.0..4.9f64,
    ) {
        let dim = pot.dim();
        let target = MomentumMode::new(coords[..dim].to_vec());
        let budget = stretch * smallest_excitation(&pot);
        // at most four excitations fit the budget
        let radius = (budget.sqrt() / TWO_PI).floor() as u32;
        let search = modes_within(dim, radius.max(1), Geometry::Box).unwrap();
        let fast = sector_minimum(&pot, &target, Some(budget)).unwrap();
        let slow = brute_force_sector_min(&pot, &target, 4, &search).unwrap();
        match slow.value.filter(|&v| v <= budget) {
            Some(v) => {
                let got = fast.value.expect("feasible within budget");
                prop_assert!((got - v).abs() <= 1e-10 * v.max(1.0), "{} vs {}", got, v);
                prop_assert_eq!(&fast.occupations, &slow.occupations);
                prop_assert!(got >= fast.lower_bound * (1.0 - 1e-12));
            }
            None => prop_assert!(fast.value.is_none(), "{:?}", fast),
        }
    }

    #[test]
    fn sector_minimum_is_symmetric(pot in any_potential(), coords in prop::collection::vec(-3i32..=3, 2)) {
        let target = MomentumMode::new(coords[..pot.dim()].to_vec());
        let a = sector_minimum(&pot, &target, None).unwrap();
        let b = sector_minimum(&pot, &target.neg(), None).unwrap();
        let (va, vb) = (a.value.unwrap(), b.value.unwrap());
        prop_assert!((va - vb).abs() <= 1e-12 * va.max(1.0));
        prop_assert_eq!(a.excitations(), b.excitations());
        prop_assert_eq!(a.degeneracy, b.degeneracy);
        prop_assert!(va >= a.lower_bound * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sector_dimensions_partition_the_space(n in 2usize..7, cutoff in 1u32..3) {
        let modes = modes_within(1, cutoff, Geometry::Ball).unwrap();
        let reach = (n as i32) * cutoff as i32;
        let total: usize = (-reach..=reach)
            .map(|p| enumerate_basis(&modes, n, &MomentumMode::new(vec![p])).unwrap().dim())
            .sum();
        let m = modes.len() as u64;
        prop_assert_eq!(total as u64, binomial(n as u64 + m - 1, m - 1));
    }

    #[test]
    fn kinetic_dominates_excitation_number(
        n in 2usize..6,
        dim in 1usize..3,
        sector in mode(2, 2),
    ) {
        let modes = modes_within(dim, 2, Geometry::Ball).unwrap();
        let sector = MomentumMode::new(sector.coords()[..dim].to_vec());
        let basis = enumerate_basis(&modes, n, &sector).unwrap();
        let t = diagonal_observable(&basis, Observable::Kinetic);
        let ex = diagonal_observable(&basis, Observable::NExcited);
        for (t, ex) in t.iter().zip(&ex) {
            prop_assert!(*t >= TWO_PI_SQ * ex);
        }
    }

    #[test]
    fn matvec_is_symmetric(
        pot in potential(1),
        n in 2usize..7,
        seed in prop::collection::vec(-1.0..1.0f64, 64),
    ) {
        let modes = modes_within(1, 2, Geometry::Ball).unwrap();
        let basis = enumerate_basis(&modes, n, &MomentumMode::zero(1)).unwrap();
        let h = build_hn(&basis, &pot).unwrap();
        let dim = h.dim();
        let x: Vec<f64> = (0..dim).map(|i| seed[i % 64]).collect();
        let y: Vec<f64> = (0..dim).map(|i| seed[(7 * i + 3) % 64]).collect();
        let hx = h.matvec(&x).unwrap();
        let hy = h.matvec(&y).unwrap();
        let a: f64 = x.iter().zip(&hy).map(|(p, q)| p * q).sum();
        let b: f64 = hx.iter().zip(&y).map(|(p, q)| p * q).sum();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));

        let mut text = Vec::new();
        h.write_matrix_market(&mut text).unwrap();
        let back = read_matrix_market(text.as_slice()).unwrap();
        prop_assert_eq!(back.to_dense(), h.to_dense());
    }

    #[test]
    fn ground_energy_obeys_the_mean_field_bounds(
        pot in potential(1),
        n in 2usize..8,
        cutoff in 1u32..3,
    ) {
        let modes = modes_within(1, cutoff, Geometry::Ball).unwrap();
        let e0 = lowest(&pot, &modes, n, &MomentumMode::zero(1), 1)[0];
        let nf = n as f64;
        let shifted = e0 - nf * pot.vhat_zero() / 2.0;
        let floor = -nf / (2.0 * (nf - 1.0)) * (pot.vzero() - pot.vhat_zero());
        let tol = 1e-9 * e0.abs().max(1.0);
        prop_assert!(shifted <= tol);
        prop_assert!(shifted >= floor - tol);
    }

    #[test]
    fn boosts_shift_the_spectrum(
        pot in potential(1),
        n in 2usize..5,
        p in -1i32..=1,
        q in prop_oneof![Just(-2i32), Just(-1), Just(1), Just(2)],
    ) {
        let modes = modes_within(1, 2, Geometry::Ball).unwrap();
        let sector = MomentumMode::new(vec![p]);
        let qm = MomentumMode::new(vec![q]);
        let moved_modes = modes.shifted(&qm).unwrap();
        let moved_sector = sector.add(&qm.scale(n as i32));
        let a = lowest(&pot, &modes, n, &sector, usize::MAX);
        let b = lowest(&pot, &moved_modes, n, &moved_sector, usize::MAX);
        prop_assert_eq!(a.len(), b.len());
        let shift = TWO_PI_SQ * f64::from(n as i32 * q * q + 2 * q * p);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - shift - x).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}

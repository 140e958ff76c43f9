use std::collections::BTreeSet;

use proptest::prelude::*;
use rdfm_hdg::femcore::basis::CellBasis;
use rdfm_hdg::femcore::quadrature::triangle_quadrature;
use rdfm_hdg::geometry::{classify_cells, discretize_all, refine_near_fractures, CellClassification};
use rdfm_hdg::linsolve::{solve_dense_cholesky, solve_spd};
use rdfm_hdg::mesh::{bisect, build_uniform_triangulation, perturb_vertices};
use rdfm_hdg::postprocess::{postprocess_pressure, sample_line};
use rdfm_hdg::scenario::{builtin_example1, parse_scenario, scenario_to_toml, Example1Variant, LineCut};
use rdfm_hdg::*;

fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (1usize..=6, 1usize..=6, prop_oneof![Just(0.0), 0.0..0.24], any::<u64>()).prop_map(|(nx, ny, amp, seed)| {
        let m = build_uniform_triangulation(nx, ny, Rect::unit_square()).unwrap();
        perturb_vertices(&m, amp, seed).unwrap()
    })
}

fn point_strategy() -> impl Strategy<Value = Point> {
    (0.05f64..0.95, 0.05f64..0.95).prop_map(|(x, y)| [x, y])
}

fn fracture_strategy() -> impl Strategy<Value = FractureSpec> {
    (point_strategy(), point_strategy(), any::<bool>())
        .prop_filter("fracture too short", |(a, b, _)| (a[0] - b[0]).hypot(a[1] - b[1]) > 0.05)
        .prop_map(|(a, b, conductive)| {
            let kind = if conductive { FractureKind::Conductive } else { FractureKind::Blocking };
            FractureSpec::new(a, b, 1e-3, if conductive { 1e3 } else { 1e-3 }, kind)
        })
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn flat(v: &[Vec<f64>]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}

fn classes(c: &CellClassification) -> Vec<i32> {
    c.class_of.iter().map(|k| k.code()).collect()
}

/// Every cell edge appears once in the facet table, shared by at most two
/// cells that both list it.
fn check_facet_table(m: &Mesh) {
    let mut uses = vec![0usize; m.num_facets()];
    for (c, fs) in m.cell_facets.iter().enumerate() {
        let vs = m.cells[c];
        for (e, &f) in fs.iter().enumerate() {
            uses[f] += 1;
            let mut edge = [vs[e], vs[(e + 1) % 3]];
            let mut fv = m.facets[f].vertices;
            edge.sort();
            fv.sort();
            assert_eq!(edge, fv, "cell {c} edge {e}");
            let (c0, c1) = m.facets[f].cells;
            assert!(c0 == c || c1 == Some(c));
        }
    }
    for (f, n) in uses.iter().enumerate() {
        assert_eq!(*n, if m.facets[f].is_boundary() { 1 } else { 2 }, "facet {f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bisection_conserves_area_and_conformity(
        m in mesh_strategy(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
        rounds in 1usize..=3,
    ) {
        let mut mesh = m;
        for r in 0..rounds {
            let marked: BTreeSet<usize> = picks.iter().map(|i| (i.index(mesh.num_cells()) + r) % mesh.num_cells()).collect();
            let next = bisect(&mesh, &marked).unwrap();
            prop_assert!((next.total_area() - 1.0).abs() <= 1e-12);
            next.check_conforming().unwrap();
            check_facet_table(&next);
            prop_assert!(next.num_cells() >= mesh.num_cells() + 2 * marked.len().min(1));
            mesh = next;
        }
    }

    #[test]
    fn cuts_tile_the_fracture(
        m in mesh_strategy(),
        fr in fracture_strategy(),
        steps in 0usize..=2,
    ) {
        let mesh = refine_near_fractures(&m, std::slice::from_ref(&fr), steps).unwrap();
        let d = discretize_all(std::slice::from_ref(&fr), &mesh).unwrap();
        let cls = classify_cells(&mesh, &d);
        let total: f64 = cls.cuts.iter().flatten().map(|c| c.cut.length).sum();
        prop_assert!((total - fr.length()).abs() <= 1e-10 * fr.length(), "{total} vs {}", fr.length());
        let t = [(fr.b[0] - fr.a[0]) / fr.length(), (fr.b[1] - fr.a[1]) / fr.length()];
        let n = [-t[1], t[0]];
        for cc in cls.cuts.iter().flatten() {
            for p in [cc.cut.p0, cc.cut.p1] {
                let r = [p[0] - fr.a[0], p[1] - fr.a[1]];
                prop_assert!((r[0] * n[0] + r[1] * n[1]).abs() <= 1e-12);
                let s = r[0] * t[0] + r[1] * t[1];
                prop_assert!(-s <= 1e-12 && s - fr.length() <= 1e-12);
            }
        }
    }

    #[test]
    fn classification_ignores_orientation_and_numbering(
        m in mesh_strategy(),
        frs in prop::collection::vec(fracture_strategy(), 1..3),
        rotate in any::<prop::sample::Index>(),
    ) {
        let mesh = refine_near_fractures(&m, &frs, 1).unwrap();
        let base = classes(&classify_cells(&mesh, &discretize_all(&frs, &mesh).unwrap()));

        let flipped: Vec<FractureSpec> = frs.iter().map(|f| FractureSpec { a: f.b, b: f.a, ..*f }).collect();
        prop_assert_eq!(&classes(&classify_cells(&mesh, &discretize_all(&flipped, &mesh).unwrap())), &base);

        // reversed and rotated cell order
        let nc = mesh.num_cells();
        let shift = rotate.index(nc);
        let order: Vec<usize> = (0..nc).rev().map(|i| (i + shift) % nc).collect();
        let cells: Vec<[usize; 3]> = order.iter().map(|&c| mesh.cells[c]).collect();
        let permuted = Mesh::from_parts(mesh.domain, mesh.vertices.clone(), cells, &mesh.tag_map()).unwrap();
        let got = classes(&classify_cells(&permuted, &discretize_all(&frs, &permuted).unwrap()));
        let expected: Vec<i32> = order.iter().map(|&c| base[c]).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn triangle_rules_integrate_polynomials(order in 0usize..=6, coeffs in prop::collection::vec(-1.0f64..1.0, 28)) {
        let rule = triangle_quadrature(order).unwrap();
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let monomials: Vec<(usize, usize)> = (0..=order).flat_map(|d| (0..=d).map(move |i| (i, d - i))).collect();
        let f = |p: &[f64; 2]| monomials.iter().zip(&coeffs).map(|(&(i, j), c)| c * p[0].powi(i as i32) * p[1].powi(j as i32)).sum::<f64>();
        let exact: f64 = monomials.iter().zip(&coeffs).map(|(&(i, j), c)| c * fact(i) * fact(j) / fact(i + j + 2)).sum();
        let approx: f64 = rule.iter().map(|(p, w)| w * f(p)).sum();
        prop_assert!((approx - exact).abs() < 1e-14, "{approx} vs {exact}");
    }

    #[test]
    fn cell_basis_reproduces_its_polynomials(
        k in 0usize..=3,
        coeffs in prop::collection::vec(-1.0f64..1.0, 10),
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
    ) {
        let xi = if x + y > 1.0 { [1.0 - x, 1.0 - y] } else { [x, y] };
        let monomials: Vec<(usize, usize)> = (0..=k).flat_map(|d| (0..=d).map(move |i| (i, d - i))).collect();
        let poly = |p: [f64; 2]| monomials.iter().zip(&coeffs).map(|(&(i, j), c)| c * p[0].powi(i as i32) * p[1].powi(j as i32)).sum::<f64>();
        let basis = CellBasis::new(k).unwrap();
        let nodal: Vec<f64> = CellBasis::nodes(k).into_iter().map(poly).collect();
        let value: f64 = basis.values(xi).iter().zip(&nodal).map(|(b, v)| b * v).sum();
        prop_assert!((value - poly(xi)).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_cholesky(n in 1usize..=500, density in 1usize..=6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for _ in 0..density {
                let j = rng.random_range(0..n);
                if j != i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                    diag[i] += v.abs();
                    diag[j] += v.abs();
                }
            }
        }
        for (i, d) in diag.iter().enumerate() {
            t.push((i, i, d + 10f64.powf(rng.random_range(-3.0..1.0))));
        }
        let a = SparseSym::from_triplets(n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let report = solve_spd(&a, &b, CgOptions::default()).unwrap();
        let exact = solve_dense_cholesky(&a, &b).unwrap();
        prop_assert!(relative(&report.x, &exact) < 1e-9);

        let mut ax = vec![0.0; n];
        a.mul_vec(&report.x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
        let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((rel - report.residual).abs() <= 1e-14);
    }
}

fn scaled(s: &Scenario, c: f64) -> Scenario {
    let mut t = s.clone();
    t.matrix_permeability.value *= c;
    for r in &mut t.matrix_permeability.regions {
        r.value *= c;
    }
    for f in &mut t.fractures {
        f.permeability *= c;
    }
    t.source = t.source.scaled(c).unwrap();
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn permeability_and_source_scaling(
        c in prop_oneof![0.01f64..0.1, 10.0f64..100.0],
        k in 0usize..=2,
        frs in prop::collection::vec(fracture_strategy(), 0..3),
        f in -2.0f64..2.0,
    ) {
        let mut s = builtin_example1(Example1Variant::Conductive).with_degree(k);
        s.mesh = scenario::MeshSettings { nx: 4, ny: 4, refine_steps: 1, perturbation: 0.1, seed: 5 };
        s.fractures = frs;
        s.source = Field::Constant(f);
        let opts = CgOptions { tol: 1e-14, max_iter: None };
        let (_, _, a) = solve_problem(&Discretization::from_scenario(&s).unwrap(), opts).unwrap();
        let (_, _, b) = solve_problem(&Discretization::from_scenario(&scaled(&s, c)).unwrap(), opts).unwrap();
        let cu: Vec<f64> = flat(&a.u).iter().map(|v| c * v).collect();
        let cut: Vec<f64> = flat(&a.u_tilde).iter().map(|v| c * v).collect();
        prop_assert!(relative(&flat(&b.u), &cu) < 1e-8);
        prop_assert!(relative(&flat(&b.u_tilde), &cut) < 1e-8);
        prop_assert!(relative(&flat(&b.p), &flat(&a.p)) < 1e-8);
        prop_assert!(relative(&flat(&b.p_hat), &flat(&a.p_hat)) < 1e-8);
    }

    #[test]
    fn line_sampling_ignores_cell_numbering(shift in any::<prop::sample::Index>(), y in 0.0f64..1.0) {
        let mut s = builtin_example1(Example1Variant::Blocking);
        s.mesh = scenario::MeshSettings { nx: 5, ny: 5, refine_steps: 1, perturbation: 0.0, seed: 0 };
        let disc = Discretization::from_scenario(&s).unwrap();
        let (_, _, sol) = solve_problem(&disc, CgOptions::default()).unwrap();
        let p_star = postprocess_pressure(&disc, &sol).unwrap();
        // x = 0.4 and y = 0.4 run along mesh lines, where p* jumps.
        let cuts = [
            LineCut { a: [0.4, 0.0], b: [0.4, 1.0], n: 51 },
            LineCut { a: [0.0, 0.4], b: [1.0, 0.4], n: 51 },
            LineCut { a: [0.0, y], b: [1.0, 1.0 - y], n: 37 },
        ];

        let mesh = &disc.mesh;
        let nc = mesh.num_cells();
        let sh = shift.index(nc);
        let order: Vec<usize> = (0..nc).rev().map(|i| (i + sh) % nc).collect();
        let cells: Vec<[usize; 3]> = order.iter().map(|&c| mesh.cells[c]).collect();
        let permuted = Mesh::from_parts(mesh.domain, mesh.vertices.clone(), cells, &mesh.tag_map()).unwrap();
        // Orientation is preserved, so the local coefficients carry over.
        let field = CellField {
            basis: p_star.basis.clone(),
            coeffs: order.iter().map(|&c| p_star.coeffs[c].clone()).collect(),
        };
        for cut in &cuts {
            let a = sample_line(mesh, &p_star, cut).unwrap();
            prop_assert_eq!(&a, &sample_line(mesh, &p_star, cut).unwrap());
            let b = sample_line(&permuted, &field, cut).unwrap();
            for (sa, sb) in a.iter().zip(&b) {
                prop_assert!((sa.value - sb.value).abs() <= 1e-13, "{:?} vs {:?}", sa, sb);
            }
        }
    }

    #[test]
    fn scenario_round_trip(
        k in 0usize..=2,
        frs in prop::collection::vec(fracture_strategy(), 0..4),
        nx in 1usize..40,
        ny in 1usize..40,
        steps in 0usize..5,
        amp in 0.0f64..0.24,
        seed in any::<u64>(),
        penalties in (0.1f64..10.0, 0.0f64..3.0, 0.1f64..10.0, 0.0f64..4.0, 0.5f64..3.0),
        data in (-10.0f64..10.0, -10.0f64..10.0, -1.0f64..1.0),
        neumann_top in any::<bool>(),
        region in prop::option::of(1e-3f64..1e3),
    ) {
        let mut s = builtin_example1(Example1Variant::Blocking).with_degree(k);
        s.name = "round_trip".into();
        s.fractures = frs;
        s.mesh = scenario::MeshSettings { nx, ny, refine_steps: steps, perturbation: amp, seed };
        s.penalties = PenaltyParams {
            c_b: penalties.0,
            s_b: penalties.1,
            c_c: penalties.2,
            s_c: penalties.3,
            length: penalties.4,
            global_scale: None,
        };
        s.source = Field::Affine { c0: data.0, cx: data.1, cy: data.2 };
        s.boundary.left = BoundaryCondition::Dirichlet(Field::Constant(data.0));
        if neumann_top {
            s.boundary.top = BoundaryCondition::Neumann(data.1);
        }
        if let Some(v) = region {
            s.matrix_permeability.regions.push(scenario::PermeabilityRegion { rect: Rect::new(0.1, 0.2, 0.3, 0.9), value: v });
        }
        s.validate().unwrap();
        let text = scenario_to_toml(&s).unwrap();
        let back = parse_scenario(&text, "ignored").unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn shipped_scenario_files_match_builtins() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for (file, v) in [("example1a.toml", Example1Variant::Conductive), ("example1b.toml", Example1Variant::Blocking)] {
        let loaded = scenario::load_scenario(&dir.join(file)).unwrap();
        assert_eq!(loaded, builtin_example1(v), "{file}");
    }
    scenario::load_scenario(&dir.join("fracture_network_template.toml")).unwrap();
}

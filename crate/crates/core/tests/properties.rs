use jamlink::analyze::{
    band_series, diameter_ratio, hysteresis_residual, mean_std, DiameterSeries, TrialSet,
};
use jamlink::design::LinkDesign;
use jamlink::kinematics::{slot_profile, BendState};
use jamlink::optimize::{
    evaluate_design, search_designs, DesignTargets, Parameter, ParameterRange, SearchBounds,
    SearchOptions,
};
use jamlink::pattern::{export_svg, generate_cut_pattern, PatternOptions};
use jamlink::sheath::{
    derive_lengths, jamming_holding_force, max_bend_angle, FlapPattern, JammingState,
};
use jamlink::spine::{central_gap, max_beam_length, SpineDesign};
use jamlink::stiffness::{synthesize_trace, LinkVariant, StiffnessModelParams, TRACE_STEP_MM};
use proptest::prelude::*;
use regex::Regex;

fn pattern() -> impl Strategy<Value = FlapPattern> {
    (
        (1.0f64..20.0, 5.0f64..50.0, 5.0f64..30.0, 2.0f64..10.0),
        (0.0f64..0.99, 20.0f64..60.0, 2u32..60, 4u32..20),
        (1u32..12, 0.05f64..1.5, 0.0f64..60.0),
    )
        .prop_map(
            |((w, l, h, d), (slot_frac, phi, n, f), (c, mu, incl))| FlapPattern {
                flap_width: w,
                flap_length: l,
                mid_length: h,
                guide_hole_distance: d,
                slot_length: slot_frac * (2.0 * d).min(phi),
                sheath_diameter: phi,
                loop_count: n,
                flaps_per_section: f,
                contact_surfaces: c,
                friction_coefficient: mu,
                inclination_angle: incl,
            },
        )
}

fn spine() -> impl Strategy<Value = SpineDesign> {
    (4.0f64..12.0, 20.0f64..40.0, 0.0f64..3.0, 0.0f64..10.0).prop_map(
        |(seg_h, seg_d, g_c, beam_extra)| {
            let reach = g_c + seg_h / 2.0;
            SpineDesign {
                segment_height: seg_h,
                segment_diameter: seg_d,
                compressed_gap: g_c,
                ligament_beam: reach + beam_extra,
                ..SpineDesign::reference_design()
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn length_span_is_slot_times_gaps(p in pattern()) {
        let l = derive_lengths(&p).unwrap();
        let span = f64::from(p.loop_count - 1) * p.slot_length;
        prop_assert!((l.l_max - l.l_min - span).abs() <= 1e-9 * l.l_max.max(1.0));
        prop_assert!(l.l_min <= l.l_default && l.l_default <= l.l_max);
    }

    #[test]
    fn bend_angle_grows_with_slot_and_loops(p in pattern(), k in 1.01f64..1.5) {
        let base = max_bend_angle(&p).unwrap();
        let longer = FlapPattern {
            slot_length: (p.slot_length * k).min(0.99 * (2.0 * p.guide_hole_distance).min(p.sheath_diameter)),
            ..p
        };
        prop_assert!(max_bend_angle(&longer).unwrap() >= base);
        let more = FlapPattern { loop_count: p.loop_count + 1, ..p };
        prop_assert!(max_bend_angle(&more).unwrap() >= base);
        let wider = FlapPattern { sheath_diameter: p.sheath_diameter * k, ..p };
        prop_assert!(max_bend_angle(&wider).unwrap() <= base);
    }

    #[test]
    fn holding_force_is_linear(p in pattern(), gauge in -100.0f64..-0.1, k in 0.1f64..3.0) {
        let s = JammingState::from_gauge(gauge);
        let base = jamming_holding_force(&p, &s).unwrap();
        let tol = 1e-9 * base.max(1.0);
        let w = jamming_holding_force(&FlapPattern { flap_width: p.flap_width * k, ..p }, &s).unwrap();
        prop_assert!((w - k * base).abs() <= tol);
        let l = jamming_holding_force(&FlapPattern { flap_length: p.flap_length * k, ..p }, &s).unwrap();
        prop_assert!((l - k * base).abs() <= tol);
        let lower = JammingState::from_gauge(gauge * k.min(1.0));
        let q = jamming_holding_force(&p, &lower).unwrap();
        prop_assert!((q - k.min(1.0) * base).abs() <= tol);
        prop_assert_eq!(jamming_holding_force(&p, &JammingState::from_gauge(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn slot_extension_stays_within_half_slot(p in pattern(), frac in 0.0f64..=1.0) {
        let theta = max_bend_angle(&p).unwrap().min(360.0);
        let length = derive_lengths(&p).unwrap().l_default;
        let profile = slot_profile(&p, &BendState::new(length, frac * theta)).unwrap();
        prop_assert_eq!(profile.intervals.len() as u32, p.loop_count - 1);
        prop_assert!((profile.total_angle() - frac * theta).abs() <= 1e-9 * theta.max(1.0));
        for i in &profile.intervals {
            prop_assert!(i.outer_extension >= -1e-12 && i.outer_extension <= p.slot_length / 2.0 + 1e-9);
        }
    }

    #[test]
    fn central_gap_shrinks_with_longer_beam(s in spine(), extra in 0.01f64..3.0) {
        let g = central_gap(&s).unwrap();
        let longer = SpineDesign { ligament_beam: s.ligament_beam + extra, ..s };
        prop_assert!(central_gap(&longer).unwrap() < g);
        let wider = SpineDesign { segment_diameter: s.segment_diameter + extra, ..s };
        prop_assert!(central_gap(&wider).unwrap() > g);
    }

    #[test]
    fn beam_limit_inverts_gap(s in spine(), frac in 0.0f64..0.95) {
        let reach = s.compressed_gap + s.segment_height / 2.0;
        let target = frac * s.segment_diameter / 2.0;
        if let Ok(b) = max_beam_length(&s, target) {
            prop_assume!(b >= reach);
            let g = central_gap(&SpineDesign { ligament_beam: b, ..s }).unwrap();
            prop_assert!((g - target).abs() <= 1e-6);
        }
    }

    #[test]
    fn diameter_ratio_is_scale_invariant(
        ds in prop::collection::vec(1.0f64..80.0, 2..12),
        c in 0.001f64..1000.0,
    ) {
        let points: Vec<(f64, f64)> =
            ds.iter().enumerate().map(|(i, &d)| (i as f64 * 15.0, d)).collect();
        let a = diameter_ratio(&DiameterSeries { variant: "x".into(), points: points.clone() }).unwrap();
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(t, d)| (t, d * c)).collect();
        let b = diameter_ratio(&DiameterSeries { variant: "x".into(), points: scaled }).unwrap();
        prop_assert_eq!(a[0].1, 1.0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.1 - y.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn hysteresis_round_trips(fraction in 0.0f64..=1.0, angle in 0.0f64..180.0) {
        let params = StiffnessModelParams { hysteresis_fraction: fraction, ..StiffnessModelParams::default() };
        let variant = LinkVariant::layer(FlapPattern::reference_design());
        let trace = synthesize_trace(&variant, angle, &JammingState::reference(), &params).unwrap();
        let r = hysteresis_residual(&trace, 0.05).unwrap();
        prop_assert!((r - 10.0 * fraction).abs() <= TRACE_STEP_MM + 1e-9);
    }

    #[test]
    fn statistics_ignore_trial_order(
        fractions in prop::collection::vec(0.0f64..0.5, 2..6),
        rot in 0usize..6,
    ) {
        let variant = LinkVariant::layer(FlapPattern::reference_design());
        let traces: Vec<_> = fractions
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let params = StiffnessModelParams { hysteresis_fraction: f, ..StiffnessModelParams::default() };
                let mut t = synthesize_trace(&variant, 45.0, &JammingState::reference(), &params).unwrap();
                t.metadata.trial = i as u32 + 1;
                t
            })
            .collect();
        let mut rotated = traces.clone();
        rotated.rotate_left(rot % traces.len());
        let a = band_series(&TrialSet::new(traces).unwrap(), 0.5).unwrap();
        let b = band_series(&TrialSet::new(rotated).unwrap(), 0.5).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mean_std_is_permutation_invariant(mut xs in prop::collection::vec(-100.0f64..100.0, 1..30)) {
        let a = mean_std(&xs);
        xs.reverse();
        prop_assert_eq!(a, mean_std(&xs));
    }

    #[test]
    fn svg_round_trips_holes(loops in 2u32..8, flaps in 4u32..16) {
        let p = FlapPattern { loop_count: loops, flaps_per_section: flaps, ..FlapPattern::reference_design() };
        let cut = generate_cut_pattern(&p, &PatternOptions::default()).unwrap();
        let svg = export_svg(&cut, 1.0);
        let re = Regex::new(r#"<circle[^>]* cx="([^"]+)" cy="([^"]+)""#).unwrap();
        let parsed: Vec<(f64, f64)> = re
            .captures_iter(&svg)
            .map(|c| (c[1].parse().unwrap(), c[2].parse().unwrap()))
            .collect();
        prop_assert_eq!(parsed.len(), cut.holes.len());
        for (h, (x, y)) in cut.holes.iter().zip(parsed) {
            prop_assert!((h.center.x - x).abs() <= 1e-6 && (h.center.y - y).abs() <= 1e-6);
        }
        let (l_max, l_min, l_default) = cut.implied_lengths().unwrap();
        let want = derive_lengths(&p).unwrap();
        prop_assert!((l_max - want.l_max).abs() <= 1e-9);
        prop_assert!((l_min - want.l_min).abs() <= 1e-9);
        prop_assert!((l_default - want.l_default).abs() <= 1e-9);
    }
}

fn small_bounds() -> SearchBounds {
    let r = |min: f64, max: f64, steps: u32| ParameterRange { min, max, steps };
    SearchBounds {
        base: LinkDesign::reference_design(),
        parameters: [
            (Parameter::SlotLength, r(3.0, 5.0, 5)),
            (Parameter::LigamentBeam, r(8.0, 10.0, 5)),
            (Parameter::FlapWidth, r(8.0, 12.0, 3)),
        ]
        .into_iter()
        .collect(),
    }
}

#[test]
fn optimizer_is_deterministic() {
    let targets = DesignTargets {
        min_bend_angle: 187.0,
        min_central_gap: 7.5,
        ..DesignTargets::default()
    };
    let opts = SearchOptions {
        seed: 11,
        ..SearchOptions::default()
    };
    let a = search_designs(&targets, &small_bounds(), &opts).unwrap();
    let b = search_designs(&targets, &small_bounds(), &opts).unwrap();
    assert_eq!(
        serde_json::to_string(&a.designs).unwrap(),
        serde_json::to_string(&b.designs).unwrap()
    );
}

#[test]
fn stricter_gap_never_enlarges_feasible_set() {
    let mut previous = usize::MAX;
    for gap in [0.0, 6.0, 7.5, 8.0, 8.5, 9.0, 20.0] {
        let targets = DesignTargets {
            min_bend_angle: 150.0,
            min_central_gap: gap,
            ..DesignTargets::default()
        };
        let r = search_designs(&targets, &small_bounds(), &SearchOptions::default()).unwrap();
        let n = r.grid_feasible().count();
        assert!(n <= previous, "gap {gap}: {n} > {previous}");
        previous = n;
        for d in &r.designs {
            assert!(evaluate_design(&d.link, &targets).feasible);
        }
    }
    assert_eq!(previous, 0);
}

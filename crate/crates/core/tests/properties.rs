mod common;

use chrono::{Duration, NaiveDate, NaiveTime};
use common::dag;
use proptest::prelude::*;
use timebuffer_core::buffer::{apply_transfer, compute_buffer, operational_schedule, OperationalPlan};
use timebuffer_core::calendar::{PlanUnit, WorkCalendar};
use timebuffer_core::cpm::standard_normal_cdf;

fn calendar() -> impl Strategy<Value = WorkCalendar> {
    (0i64..28, 6u32..10, 1u32..12, prop::collection::vec(0i64..60, 0..6)).prop_map(
        |(day, start_h, len_h, exceptions)| {
            let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + Duration::days(day);
            let ws = NaiveTime::from_hms_opt(start_h, 0, 0).unwrap();
            let we = NaiveTime::from_hms_opt((start_h + len_h).min(23), 30, 0).unwrap();
            let mut cal = WorkCalendar::new(start, ws, (ws, we), PlanUnit::Minutes).unwrap();
            for e in exceptions {
                cal = cal.add_exception(start + Duration::days(e));
            }
            cal
        },
    )
}

proptest! {
    #[test]
    fn normal_cdf_symmetric_and_monotone(z in -8.0f64..8.0, dz in 0.0f64..2.0) {
        let p = standard_normal_cdf(z);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + standard_normal_cdf(-z) - 1.0).abs() < 1e-12);
        prop_assert!(standard_normal_cdf(z + dz) >= p);
    }

    #[test]
    fn calendar_advance_inverts(cal in calendar(), offset in 0i64..5000, w in 0i64..20_000) {
        let start = cal.advance(cal.origin(), offset).unwrap();
        let end = cal.advance(start, w).unwrap();
        prop_assert!(end >= start);
        prop_assert!(cal.is_working_instant(end));
        prop_assert!(!cal.exceptions().contains(&end.date()));
        prop_assert_eq!(cal.working_time_between(start, end), w);
        prop_assert_eq!(cal.working_time_between(end, start), -w);
    }

    #[test]
    fn buffer_is_recomputed_not_decremented(
        net in dag(10),
        transfers in prop::collection::vec((any::<prop::sample::Index>(), 1i64..40), 1..6),
    ) {
        let mut plan = OperationalPlan::from_network(&net);
        let at = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap().and_hms_opt(9, 0, 0).unwrap();
        for (pick, amount) in transfers {
            let code = net.tasks()[pick.index(net.tasks().len())].code.clone();
            let before = plan.operational_duration(&code).unwrap();
            let outcome = apply_transfer(&net, &plan, &code, amount, "slow", at).unwrap();
            plan = outcome.plan;
            prop_assert_eq!(plan.operational_duration(&code), Some(before + amount));

            // From-scratch formula on the new operational critical path.
            let schedule = operational_schedule(&net, &plan);
            let path = &schedule.critical_paths[0];
            let safety: i64 = path
                .iter()
                .map(|c| (net.task(c).unwrap().pessimistic - plan.operational_duration(c).unwrap()).max(0))
                .sum();
            prop_assert_eq!(outcome.buffer.value, safety / 2);
            prop_assert_eq!(&outcome.buffer.computed_over, path);
            prop_assert!(outcome.buffer.value >= 0);
            prop_assert_eq!(outcome.report.project_duration, schedule.project_duration);
        }
        let replayed = OperationalPlan::replay(&net, plan.ledger()).unwrap();
        prop_assert_eq!(&replayed, &plan);
        prop_assert_eq!(compute_buffer(&net, &replayed), compute_buffer(&net, &plan));
    }
}

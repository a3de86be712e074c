mod common;

use common::{all_paths, dag, oracle};
use proptest::prelude::*;
use timebuffer_core::cpm::{compute_schedule, DurationLens};
use timebuffer_core::plan::validate_network;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn schedule_matches_path_enumeration(net in dag(10)) {
        for lens in DurationLens::ALL {
            let durations: Vec<i64> = net.tasks().iter().map(|t| lens.duration_of(t)).collect();
            let expected = oracle(&net, &durations);
            let schedule = compute_schedule(&net, lens);
            prop_assert_eq!(schedule.project_duration, expected.duration);
            for (i, st) in schedule.tasks.iter().enumerate() {
                prop_assert_eq!(st.early_start, expected.early_start[i]);
                prop_assert_eq!(st.total_slack, expected.slack[i], "task {}", st.code);
                prop_assert!(st.total_slack >= 0);
                prop_assert_eq!(st.early_finish - st.early_start, durations[i]);
                prop_assert_eq!(st.late_start - st.early_start, st.total_slack);
            }
            prop_assert_eq!(&schedule.critical_paths, &expected.critical_paths);
        }
    }

    #[test]
    fn lens_durations_are_ordered(net in dag(10)) {
        let d = |lens| compute_schedule(&net, lens).project_duration;
        let (o, m, p, e) = (
            d(DurationLens::Optimistic),
            d(DurationLens::Probable),
            d(DurationLens::Pessimistic),
            d(DurationLens::PertExpected),
        );
        prop_assert!(o <= m && m <= p);
        prop_assert!(o <= e && e <= p);
    }

    #[test]
    fn lengthening_a_task_never_shortens_the_project(net in dag(10), pick in any::<prop::sample::Index>(), extra in 1i64..50) {
        let base = compute_schedule(&net, DurationLens::Optimistic);
        let i = pick.index(net.tasks().len());
        let mut tasks = net.tasks().to_vec();
        tasks[i].optimistic += extra;
        tasks[i].probable = tasks[i].probable.max(tasks[i].optimistic);
        tasks[i].pessimistic = tasks[i].pessimistic.max(tasks[i].probable);
        let longer = compute_schedule(&net.with_tasks(tasks), DurationLens::Optimistic);
        prop_assert!(longer.project_duration >= base.project_duration);
        prop_assert!(longer.project_duration <= base.project_duration + extra);
    }

    #[test]
    fn every_task_lies_on_a_source_sink_path(net in dag(10)) {
        prop_assert!(validate_network(&net).is_empty());
        let paths = all_paths(&net);
        for i in 0..net.tasks().len() {
            prop_assert!(paths.iter().any(|p| p.contains(&i)));
        }
    }
}
